//! Quasi-static contact rules between the point effectors and the cube.
//!
//! Applied once per step after the effectors have moved, in this order:
//! grasp check, then either carry (held) or drop followed by push (free).

use super::EnvParams;

pub type Vec3 = [f64; 3];

/// Euclidean distance from `p` to the axis-aligned cube; 0 inside.
pub fn distance_to_cube(p: &Vec3, center: &Vec3, half: f64) -> f64 {
    let mut sq = 0.0;
    for i in 0..3 {
        let d = ((p[i] - center[i]).abs() - half).max(0.0);
        sq += d * d;
    }
    sq.sqrt()
}

/// Effectors forming an opposing grasp: each within `tolerance` of the cube
/// surface and paired with another whose horizontal offset from the cube
/// center is more than 120 degrees away.
pub fn holding_effectors(effectors: &[Vec3; 3], cube: &Vec3, half: f64, tolerance: f64) -> Vec<usize> {
    let near: Vec<usize> = (0..3)
        .filter(|&i| distance_to_cube(&effectors[i], cube, half) <= tolerance)
        .collect();
    let offset = |i: usize| [effectors[i][0] - cube[0], effectors[i][1] - cube[1]];
    let mut holding = [false; 3];
    for (k, &i) in near.iter().enumerate() {
        for &j in &near[k + 1..] {
            let (u, v) = (offset(i), offset(j));
            let nu = u[0].hypot(u[1]);
            let nv = v[0].hypot(v[1]);
            if nu < 1e-9 || nv < 1e-9 {
                continue;
            }
            let cos = (u[0] * v[0] + u[1] * v[1]) / (nu * nv);
            if cos < -0.5 {
                holding[i] = true;
                holding[j] = true;
            }
        }
    }
    (0..3).filter(|&i| holding[i]).collect()
}

/// Keeps the cube inside the arena cylinder and the allowed height band.
pub fn clamp_cube(cube: &mut Vec3, params: &EnvParams) {
    let half = params.cube_half_extent;
    let r_max = params.arena_radius - half;
    let r = cube[0].hypot(cube[1]);
    if r > r_max {
        cube[0] *= r_max / r;
        cube[1] *= r_max / r;
    }
    cube[2] = cube[2].clamp(half, params.max_height);
}

/// Moves a held cube toward the holders' centroid (lowered by the half
/// extent), with displacement capped at `lift_speed_cap * dt`.
pub fn carry(cube: &mut Vec3, effectors: &[Vec3; 3], holders: &[usize], params: &EnvParams) {
    let n = holders.len() as f64;
    let mut target = [0.0; 3];
    for &i in holders {
        for d in 0..3 {
            target[d] += effectors[i][d] / n;
        }
    }
    target[2] -= params.cube_half_extent;
    clamp_cube(&mut target, params);

    let disp = [target[0] - cube[0], target[1] - cube[1], target[2] - cube[2]];
    let norm = (disp[0] * disp[0] + disp[1] * disp[1] + disp[2] * disp[2]).sqrt();
    let cap = params.lift_speed_cap * params.dt;
    let scale = if norm > cap { cap / norm } else { 1.0 };
    for d in 0..3 {
        cube[d] += disp[d] * scale;
    }
    clamp_cube(cube, params);
}

/// Free cube falls at `gravity_drop`, floor-clamped.
pub fn drop(cube: &mut Vec3, params: &EnvParams) {
    cube[2] = (cube[2] - params.gravity_drop * params.dt).max(params.cube_half_extent);
}

/// Effectors inside the cube footprint and below its top push it out along
/// the axis of least penetration, scaled by `push_gain`.
pub fn push(cube: &mut Vec3, effectors: &[Vec3; 3], params: &EnvParams) {
    let half = params.cube_half_extent;
    for e in effectors {
        let dx = e[0] - cube[0];
        let dy = e[1] - cube[1];
        if dx.abs() >= half || dy.abs() >= half || e[2] >= cube[2] + half {
            continue;
        }
        let pen_x = half - dx.abs();
        let pen_y = half - dy.abs();
        if pen_x <= pen_y {
            let dir = if dx > 0.0 { -1.0 } else { 1.0 };
            cube[0] += dir * params.push_gain * pen_x;
        } else {
            let dir = if dy > 0.0 { -1.0 } else { 1.0 };
            cube[1] += dir * params.push_gain * pen_y;
        }
    }
    clamp_cube(cube, params);
}
