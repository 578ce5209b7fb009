//! Binary training checkpoints.
//!
//! Layout: the 8-byte magic `TRAJHER1`, a little-endian `u32` format version,
//! then sections. Each section is a 4-byte ASCII tag, a `u64` payload length
//! and the payload. Sections appear in a fixed order; `BUFF` is optional.
//! All integers and floats are little-endian; floats are raw IEEE-754 bits.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::agent::DdpgAgent;
use crate::config;
use crate::env::DrSample;
use crate::error::{Error, Result};
use crate::numerics::{AdamState, Mlp, OutputActivation, RngState, RunningNormalizer, SeededRng};
use crate::replay::{Episode, ReplayBuffer};
use crate::trainer::{Progress, Stage, TrainConfig, Trainer};

pub const MAGIC: &[u8; 8] = b"TRAJHER1";
pub const VERSION: u32 = 1;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }
    fn bytes(&mut self, v: &[u8]) {
        self.u64(v.len() as u64);
        self.0.extend_from_slice(v);
    }
    fn section(&mut self, tag: &[u8; 4], body: Writer) {
        self.0.extend_from_slice(tag);
        self.bytes(&body.0);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("{} truncated at byte {}", self.what, self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()?;
        let n = usize::try_from(n).map_err(|_| Error::Checkpoint(format!("{} length overflows", self.what)))?;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(Error::Checkpoint(format!("{} length {n} exceeds remaining data", self.what)));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len(1)?;
        self.take(n)
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Checkpoint(format!("{} has {} trailing bytes", self.what, self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn write_mlp(w: &mut Writer, net: &Mlp) {
    w.u64(net.layer_sizes().len() as u64);
    for &s in net.layer_sizes() {
        w.u64(s as u64);
    }
    w.u8(match net.output_activation() {
        OutputActivation::Identity => 0,
        OutputActivation::Tanh => 1,
    });
    w.f64s(net.params());
}

fn read_mlp(r: &mut Reader<'_>) -> Result<Mlp> {
    let n = r.len(8)?;
    let sizes = (0..n).map(|_| r.u64().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    let act = match r.u8()? {
        0 => OutputActivation::Identity,
        1 => OutputActivation::Tanh,
        x => return Err(Error::Checkpoint(format!("unknown output activation code {x}"))),
    };
    let params = r.f64s()?;
    Mlp::from_params(&sizes, act, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

fn write_adam(w: &mut Writer, a: &AdamState) {
    w.u64(a.step);
    for x in [a.lr, a.beta1, a.beta2, a.eps] {
        w.f64(x);
    }
    w.f64s(&a.m);
    w.f64s(&a.v);
}

fn read_adam(r: &mut Reader<'_>) -> Result<AdamState> {
    Ok(AdamState {
        step: r.u64()?,
        lr: r.f64()?,
        beta1: r.f64()?,
        beta2: r.f64()?,
        eps: r.f64()?,
        m: r.f64s()?,
        v: r.f64s()?,
    })
}

fn write_normalizer(w: &mut Writer, n: &RunningNormalizer) {
    w.f64(n.count);
    w.f64(n.eps_std);
    w.f64(n.clip);
    w.f64s(&n.sum);
    w.f64s(&n.sum_sq);
}

fn read_normalizer(r: &mut Reader<'_>) -> Result<RunningNormalizer> {
    Ok(RunningNormalizer {
        count: r.f64()?,
        eps_std: r.f64()?,
        clip: r.f64()?,
        sum: r.f64s()?,
        sum_sq: r.f64s()?,
    })
}

fn write_goals(w: &mut Writer, goals: &[[f64; 3]]) {
    w.u64(goals.len() as u64);
    for g in goals {
        g.iter().for_each(|&x| w.f64(x));
    }
}

fn read_goals(r: &mut Reader<'_>) -> Result<Vec<[f64; 3]>> {
    let n = r.len(24)?;
    (0..n).map(|_| Ok([r.f64()?, r.f64()?, r.f64()?])).collect()
}

fn write_episode(w: &mut Writer, e: &Episode) {
    w.f64s(&e.observations);
    w.f64s(&e.actions);
    write_goals(w, &e.achieved_goals);
    write_goals(w, &e.desired_goals);
    w.bytes(&e.segment_ids);
    e.dr_sample.0.iter().for_each(|&x| w.f64(x));
    w.u8(e.success as u8);
}

fn read_episode(r: &mut Reader<'_>) -> Result<Episode> {
    let e = Episode {
        observations: r.f64s()?,
        actions: r.f64s()?,
        achieved_goals: read_goals(r)?,
        desired_goals: read_goals(r)?,
        segment_ids: r.bytes()?.to_vec(),
        dr_sample: DrSample([r.f64()?, r.f64()?, r.f64()?, r.f64()?]),
        success: r.u8()? != 0,
    };
    e.validate().map_err(|err| Error::Checkpoint(format!("stored episode invalid: {err}")))?;
    Ok(e)
}

/// Everything a checkpoint holds, decoded.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub digest: String,
    pub progress: Progress,
    pub agent: DdpgAgent,
    pub rng: RngState,
    /// Present only in resumable checkpoints.
    pub buffer: Option<ReplayBuffer>,
}

impl Checkpoint {
    /// Rebuilds a trainer. Without a stored buffer the buffer starts empty.
    pub fn into_trainer(self) -> Result<Trainer> {
        let mut t = Trainer::new(self.config)?;
        t.agent = self.agent;
        t.progress = self.progress;
        t.rng = SeededRng::from_state(self.rng);
        if let Some(b) = self.buffer {
            t.buffer = b;
        }
        Ok(t)
    }
}

pub fn encode(trainer: &Trainer, include_buffer: bool) -> Vec<u8> {
    let mut out = Writer::default();
    out.0.extend_from_slice(MAGIC);
    out.u32(VERSION);

    let mut s = Writer::default();
    s.bytes(config::to_text(&trainer.cfg).as_bytes());
    s.bytes(config::digest(&trainer.cfg).as_bytes());
    out.section(b"CONF", s);

    let p = &trainer.progress;
    let mut s = Writer::default();
    s.u64(p.epoch);
    s.u64(p.env_steps);
    s.u8(p.stage.code());
    s.u64(p.stage_epochs);
    s.f64s(&p.eval_history);
    out.section(b"PROG", s);

    let a = &trainer.agent;
    let mut s = Writer::default();
    for net in [&a.actor, &a.critic, &a.target_actor, &a.target_critic] {
        write_mlp(&mut s, net);
    }
    out.section(b"NETS", s);

    let mut s = Writer::default();
    write_adam(&mut s, &a.actor_adam);
    write_adam(&mut s, &a.critic_adam);
    out.section(b"ADAM", s);

    let mut s = Writer::default();
    write_normalizer(&mut s, &a.obs_normalizer);
    write_normalizer(&mut s, &a.goal_normalizer);
    out.section(b"NORM", s);

    let st = trainer.rng.state();
    let mut s = Writer::default();
    s.0.extend_from_slice(&st.seed);
    s.u64(st.stream);
    s.0.extend_from_slice(&st.word_pos.to_le_bytes());
    out.section(b"RNG_", s);

    if include_buffer {
        let b = &trainer.buffer;
        let mut s = Writer::default();
        s.u64(b.capacity() as u64);
        s.u64(b.inserted());
        s.u64(b.len() as u64);
        for e in b.iter() {
            write_episode(&mut s, e);
        }
        out.section(b"BUFF", s);
    }
    out.0
}

fn next_section<'a>(r: &mut Reader<'a>, tag: &[u8; 4]) -> Result<Reader<'a>> {
    let got = r.take(4)?;
    if got != tag {
        return Err(Error::Checkpoint(format!(
            "expected section {}, found {}",
            String::from_utf8_lossy(tag),
            String::from_utf8_lossy(got)
        )));
    }
    Ok(Reader::new(r.bytes()?, "section"))
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, "checkpoint");
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint: bad magic".into()));
    }
    r.take(MAGIC.len())?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }

    let mut s = next_section(&mut r, b"CONF")?;
    let text = std::str::from_utf8(s.bytes()?).map_err(|_| Error::Checkpoint("config text is not UTF-8".into()))?;
    let digest = std::str::from_utf8(s.bytes()?)
        .map_err(|_| Error::Checkpoint("digest is not UTF-8".into()))?
        .to_string();
    s.finish()?;
    let config = config::parse(text).map_err(|e| Error::Checkpoint(format!("stored config: {e}")))?;
    if config::digest(&config) != digest {
        return Err(Error::Checkpoint("stored config does not match its digest".into()));
    }

    let mut s = next_section(&mut r, b"PROG")?;
    let progress = Progress {
        epoch: s.u64()?,
        env_steps: s.u64()?,
        stage: {
            let c = s.u8()?;
            Stage::from_code(c).ok_or_else(|| Error::Checkpoint(format!("unknown stage code {c}")))?
        },
        stage_epochs: s.u64()?,
        eval_history: s.f64s()?,
    };
    s.finish()?;

    // Scalars and shapes come from the config; the stored state is then checked against them.
    let mut agent = Trainer::new(config.clone())?.agent;
    let mut s = next_section(&mut r, b"NETS")?;
    let nets = [read_mlp(&mut s)?, read_mlp(&mut s)?, read_mlp(&mut s)?, read_mlp(&mut s)?];
    s.finish()?;
    for (stored, fresh) in nets.iter().zip([&agent.actor, &agent.critic, &agent.target_actor, &agent.target_critic]) {
        if stored.layer_sizes() != fresh.layer_sizes() || stored.output_activation() != fresh.output_activation() {
            return Err(Error::Checkpoint("network shapes disagree with the stored config".into()));
        }
    }
    let [actor, critic, target_actor, target_critic] = nets;
    agent.actor = actor;
    agent.critic = critic;
    agent.target_actor = target_actor;
    agent.target_critic = target_critic;

    let mut s = next_section(&mut r, b"ADAM")?;
    agent.actor_adam = read_adam(&mut s)?;
    agent.critic_adam = read_adam(&mut s)?;
    s.finish()?;
    if agent.actor_adam.m.len() != agent.actor.param_count()
        || agent.actor_adam.v.len() != agent.actor.param_count()
        || agent.critic_adam.m.len() != agent.critic.param_count()
        || agent.critic_adam.v.len() != agent.critic.param_count()
    {
        return Err(Error::Checkpoint("optimizer state sizes disagree with the networks".into()));
    }

    let mut s = next_section(&mut r, b"NORM")?;
    let obs_n = read_normalizer(&mut s)?;
    let goal_n = read_normalizer(&mut s)?;
    s.finish()?;
    if obs_n.dim() != agent.obs_normalizer.dim() || goal_n.dim() != agent.goal_normalizer.dim() {
        return Err(Error::Checkpoint("normalizer sizes disagree with the environment".into()));
    }
    agent.obs_normalizer = obs_n;
    agent.goal_normalizer = goal_n;

    let mut s = next_section(&mut r, b"RNG_")?;
    let rng = RngState {
        seed: s.take(32)?.try_into().unwrap(),
        stream: s.u64()?,
        word_pos: u128::from_le_bytes(s.take(16)?.try_into().unwrap()),
    };
    s.finish()?;

    let buffer = if r.pos < bytes.len() {
        let mut s = next_section(&mut r, b"BUFF")?;
        let capacity = s.u64()? as usize;
        let inserted = s.u64()?;
        let n = s.u64()?;
        let episodes = (0..n).map(|_| read_episode(&mut s)).collect::<Result<Vec<_>>>()?;
        s.finish()?;
        Some(ReplayBuffer::from_parts(capacity, inserted, episodes).map_err(|e| Error::Checkpoint(e.to_string()))?)
    } else {
        None
    };
    r.finish()?;

    Ok(Checkpoint {
        config,
        digest,
        progress,
        agent,
        rng,
        buffer,
    })
}

/// Writes through a temporary file and a rename so an interrupted write
/// never replaces a valid checkpoint with a partial one.
pub fn save(path: &Path, trainer: &Trainer, include_buffer: bool) -> Result<()> {
    let bytes = encode(trainer, include_buffer);
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}
