//! Hand-written grasp-and-carry controller. Used as a reference policy to
//! show the task is solvable and as an oracle in tests.

use crate::env::{EnvParams, ACTION_DIM};
use crate::error::Result;
use crate::numerics::SeededRng;
use crate::trainer::{Policy, PolicyKind};

/// Pinches the cube between effectors 0 and 1 along the x axis, lifts it,
/// and carries it to the active goal. Effector 2 is parked at the ceiling.
#[derive(Debug, Clone)]
pub struct GraspAndCarry {
    params: EnvParams,
    /// Horizontal clearance between an effector and the cube face.
    gap: f64,
    /// Per-step effector displacement while carrying (below the lift cap).
    carry_step: f64,
}

impl GraspAndCarry {
    pub fn new(params: EnvParams) -> Self {
        Self {
            params,
            gap: 0.006,
            carry_step: 0.0095,
        }
    }

    fn toward(&self, from: &[f64], to: [f64; 3], max_step: f64) -> [f64; 3] {
        let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let scale = if n > max_step { max_step / n } else { 1.0 };
        let full = self.params.v_max * self.params.dt;
        d.map(|v| (v * scale / full).clamp(-1.0, 1.0))
    }
}

impl Policy for GraspAndCarry {
    fn act(&mut self, obs: &[f64], goal: &[f64; 3], _kind: PolicyKind, _rng: &mut SeededRng) -> Result<Vec<f64>> {
        let h = self.params.cube_half_extent;
        let cube = [obs[27], obs[28], obs[29]];
        let e0 = &obs[0..3];
        let e1 = &obs[3..6];
        let off = h + self.gap;
        let full = self.params.v_max * self.params.dt;

        // Approach along the tangential axis so both grip points stay inside the arena.
        let r = cube[0].hypot(cube[1]);
        let approach_axis = if r > 1e-3 { [-cube[1] / r, cube[0] / r] } else { [1.0, 0.0] };
        let grip0 = [cube[0] + off * approach_axis[0], cube[1] + off * approach_axis[1], cube[2]];
        let grip1 = [cube[0] - off * approach_axis[0], cube[1] - off * approach_axis[1], cube[2]];

        let mid = [(e0[0] + e1[0]) / 2.0, (e0[1] + e1[1]) / 2.0];
        let span = (e0[0] - e1[0]).hypot(e0[1] - e1[1]);
        let placed = (mid[0] - cube[0]).hypot(mid[1] - cube[1]) < 0.004 && (span - 2.0 * off).abs() < 0.008;
        let low_enough = e0[2] <= cube[2] + h + 0.005 && e1[2] <= cube[2] + h + 0.005;

        let mut action = vec![0.0; ACTION_DIM];
        let (a0, a1) = if placed && low_enough {
            // Grasped: carry so that the cube center lands on the goal.
            let axis = [(e0[0] - e1[0]) / span, (e0[1] - e1[1]) / span];
            let c0 = [goal[0] + off * axis[0], goal[1] + off * axis[1], goal[2] + h];
            let c1 = [goal[0] - off * axis[0], goal[1] - off * axis[1], goal[2] + h];
            (self.toward(e0, c0, self.carry_step), self.toward(e1, c1, self.carry_step))
        } else if placed {
            // Above the grip points: descend to the cube's mid height.
            let d0 = [e0[0], e0[1], cube[2]];
            let d1 = [e1[0], e1[1], cube[2]];
            (self.toward(e0, d0, full), self.toward(e1, d1, full))
        } else {
            // Travel above the cube top, then line up.
            let cruise = cube[2] + h + 0.03;
            let hover0 = [grip0[0], grip0[1], cruise];
            let hover1 = [grip1[0], grip1[1], cruise];
            (self.toward(e0, hover0, full), self.toward(e1, hover1, full))
        };
        action[0..3].copy_from_slice(&a0);
        action[3..6].copy_from_slice(&a1);
        // Park the idle effector overhead, clear of any carried cube.
        action[8] = 1.0;
        Ok(action)
    }
}
