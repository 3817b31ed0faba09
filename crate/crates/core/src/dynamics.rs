//! N-body Hamiltonian, leapfrog integration and conservation monitors.
//!
//! The fixed-step kick-drift-kick leapfrog conserves linear and angular
//! momentum to roundoff for the pairwise central force, which makes the
//! invariance of the Laplace plane and of the fixed-direction submanifold
//! directly observable on trajectories.

use crate::deprit::to_deprit;
use crate::error::{Error, Result};
use crate::jacobi::to_jacobi;
use crate::kepler::{mean_motion, DelaunayElements};
use crate::phasespace::{angle_diff, wrap_angle, Body, PhaseState, Vec3};

/// Abort when any pairwise distance falls under this fraction of the
/// initial minimum distance (the scheme is not regularized).
pub const COLLISION_FRACTION: f64 = 1e-8;

/// The N-body Hamiltonian
/// `F = ½ Σ |p_j|²/m_j − Σ_{j<k} m_j m_k / |q_j − q_k|` (G = 1), any N ≥ 2.
pub fn hamiltonian(state: &PhaseState) -> Result<f64> {
    let bodies = state.bodies();
    let masses = state.masses();
    let mut energy = 0.0;
    for (b, m) in bodies.iter().zip(masses) {
        energy += b.momentum.norm_squared() / (2.0 * m);
    }
    for i in 0..bodies.len() {
        for j in (i + 1)..bodies.len() {
            let r = (bodies[i].position - bodies[j].position).norm();
            if r <= 0.0 {
                return Err(Error::Collision { i, j });
            }
            energy -= masses[i] * masses[j] / r;
        }
    }
    Ok(energy)
}

fn min_pair_distance(positions: &[Vec3]) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            min = min.min((positions[i] - positions[j]).norm());
        }
    }
    min
}

fn forces(positions: &[Vec3], masses: &[f64]) -> Vec<Vec3> {
    let n = positions.len();
    let mut out = vec![Vec3::zero(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = positions[j] - positions[i];
            let r2 = d.norm_squared();
            let f = d.scale(masses[i] * masses[j] / (r2 * r2.sqrt()));
            out[i] = out[i] + f;
            out[j] = out[j] - f;
        }
    }
    out
}

/// A sampled trajectory with per-sample conservation monitors. When the
/// integration hit the collision threshold, `abort` records where and the
/// samples up to that step are kept.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub energy: Vec<f64>,
    pub angular_momentum: Vec<Vec3>,
    pub abort: Option<Error>,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }

    pub fn last_state(&self) -> &PhaseState {
        self.states.last().expect("trajectory has at least the initial sample")
    }
}

/// Fixed-step kick-drift-kick leapfrog on the separable N-body Hamiltonian,
/// recording monitors each step. Aborts (with partial trajectory) when a
/// pairwise distance falls under [`COLLISION_FRACTION`] of the initial
/// minimum.
pub fn integrate(state: &PhaseState, dt: f64, steps: usize) -> Result<Trajectory> {
    integrate_with_collision_fraction(state, dt, steps, COLLISION_FRACTION)
}

/// [`integrate`] with an explicit collision fraction.
pub fn integrate_with_collision_fraction(
    state: &PhaseState,
    dt: f64,
    steps: usize,
    collision_fraction: f64,
) -> Result<Trajectory> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidState(format!("dt = {dt} must be > 0")));
    }
    let masses = state.masses().to_vec();
    let mut positions: Vec<Vec3> = state.bodies().iter().map(|b| b.position).collect();
    let mut momenta: Vec<Vec3> = state.bodies().iter().map(|b| b.momentum).collect();
    let threshold = collision_fraction * min_pair_distance(&positions);

    let record = |t: f64,
                  positions: &[Vec3],
                  momenta: &[Vec3],
                  traj: &mut Trajectory|
     -> Result<()> {
        let bodies = positions
            .iter()
            .zip(momenta)
            .map(|(q, p)| Body::new(*q, *p))
            .collect();
        let s = PhaseState::new(bodies, masses.clone())?;
        traj.energy.push(hamiltonian(&s)?);
        traj.angular_momentum.push(s.angular_momentum());
        traj.times.push(t);
        traj.states.push(s);
        Ok(())
    };

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        angular_momentum: Vec::with_capacity(steps + 1),
        abort: None,
    };
    record(0.0, &positions, &momenta, &mut traj)?;

    let mut f = forces(&positions, &masses);
    for step in 1..=steps {
        for i in 0..momenta.len() {
            momenta[i] = momenta[i] + f[i].scale(0.5 * dt);
        }
        for i in 0..positions.len() {
            positions[i] = positions[i] + momenta[i].scale(dt / masses[i]);
        }
        f = forces(&positions, &masses);
        for i in 0..momenta.len() {
            momenta[i] = momenta[i] + f[i].scale(0.5 * dt);
        }
        let min_d = min_pair_distance(&positions);
        if min_d < threshold {
            traj.abort = Some(Error::CollisionAbort {
                step,
                min_distance: min_d,
            });
            break;
        }
        record(step as f64 * dt, &positions, &momenta, &mut traj)?;
    }
    Ok(traj)
}

/// Kepler flow in Delaunay variables: only the mean anomaly advances,
/// `l(t) = l_0 + n t (mod 2π)` with `n` the mean motion of `L`.
pub fn propagate_kepler(
    d: &DelaunayElements,
    mu: f64,
    mgrav: f64,
    t: f64,
) -> Result<DelaunayElements> {
    let n = mean_motion(d.L, mu, mgrav)?;
    let mut out = *d;
    out.l = wrap_angle(d.l + n * t);
    Ok(out)
}

/// Report of the fixed-direction invariance demonstration.
#[derive(Clone, Debug)]
pub struct InvarianceReport {
    /// Max angle between the instantaneous Ĉ and the fixed direction (rad).
    pub max_direction_dev: f64,
    /// Max relative drift of |C⃗|.
    pub max_cnorm_drift: f64,
    /// Max relative energy drift.
    pub max_energy_drift: f64,
    /// For N = 3 and nondegenerate samples: max drift of the reduced
    /// actions/angles (Φ₁, Φ₂, φ₂) that the flow must conserve, and the
    /// observed spans of (l₁, ḡ₁, φ₁) that it must move.
    pub deprit: Option<DepritDrift>,
    pub steps: usize,
}

/// Drift of the conserved Deprit coordinates along a trajectory, plus the
/// spans of three coordinates the flow is expected to move.
#[derive(Clone, Debug)]
pub struct DepritDrift {
    pub phi1_drift: f64,
    pub phi2_drift: f64,
    pub phi2_angle_drift: f64,
    pub mean_anomaly_span: f64,
    pub pericenter_span: f64,
    pub laplace_node_span: f64,
}

/// Integrate and verify that the direction of the total angular momentum
/// stays put: the submanifold with fixed Ĉ direction is invariant under the
/// flow. `direction` must be parallel to C⃗ of the initial state.
pub fn invariance_demo(
    state: &PhaseState,
    direction: Vec3,
    dt: f64,
    steps: usize,
) -> Result<InvarianceReport> {
    let c0 = state.angular_momentum();
    if c0.norm() == 0.0 {
        return Err(Error::ZeroAngularMomentum { level: 0 });
    }
    let d_hat = direction.normalized();
    if c0.normalized().angle_to(d_hat) > 1e-8 {
        return Err(Error::InvalidState(
            "initial C is not parallel to the requested direction".into(),
        ));
    }
    let traj = integrate(state, dt, steps)?;
    if let Some(abort) = traj.abort {
        return Err(abort);
    }
    let c_norm0 = c0.norm();
    let e0 = traj.energy[0];
    let mut max_dev: f64 = 0.0;
    let mut max_cnorm: f64 = 0.0;
    let mut max_energy: f64 = 0.0;
    for (c, e) in traj.angular_momentum.iter().zip(&traj.energy) {
        max_dev = max_dev.max(c.normalized().angle_to(d_hat));
        max_cnorm = max_cnorm.max((c.norm() - c_norm0).abs() / c_norm0);
        max_energy = max_energy.max((e - e0).abs() / e0.abs().max(1.0));
    }

    let deprit = if state.n_bodies() == 3 {
        deprit_drift(&traj).ok()
    } else {
        None
    };

    Ok(InvarianceReport {
        max_direction_dev: max_dev,
        max_cnorm_drift: max_cnorm,
        max_energy_drift: max_energy,
        deprit,
        steps,
    })
}

fn deprit_drift(traj: &Trajectory) -> Result<DepritDrift> {
    let mut phi1 = Vec::with_capacity(traj.states.len());
    let mut phi2 = Vec::with_capacity(traj.states.len());
    let mut phi2_angle = Vec::with_capacity(traj.states.len());
    let mut mean_anom = Vec::with_capacity(traj.states.len());
    let mut pericenter = Vec::with_capacity(traj.states.len());
    let mut laplace_node = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        let (jac, _) = to_jacobi(s);
        let d = to_deprit(&jac)?;
        phi1.push(d.c_norm());
        phi2.push(d.c_z());
        phi2_angle.push(d.reference_node_angle());
        mean_anom.push(d.blocks()[0].l);
        pericenter.push(d.blocks()[0].g_bar);
        laplace_node.push(d.laplace_node_angle());
    }
    let drift = |vals: &[f64]| -> f64 {
        let first = vals[0];
        vals.iter().map(|v| (v - first).abs()).fold(0.0, f64::max)
    };
    let angle_drift = |vals: &[f64]| -> f64 {
        let first = vals[0];
        vals.iter()
            .map(|v| angle_diff(*v, first).abs())
            .fold(0.0, f64::max)
    };
    Ok(DepritDrift {
        phi1_drift: drift(&phi1),
        phi2_drift: drift(&phi2),
        phi2_angle_drift: angle_drift(&phi2_angle),
        mean_anomaly_span: angle_drift(&mean_anom),
        pericenter_span: angle_drift(&pericenter),
        laplace_node_span: angle_drift(&laplace_node),
    })
}

/// Write a trajectory, one sample per line:
/// `t q0x q0y q0z ... q{N-1}z p0x ... p{N-1}z F Cx Cy Cz`,
/// every number with 18 significant digits.
pub fn write_trajectory(traj: &Trajectory, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "# t q[0..N)xyz p[0..N)xyz F Cx Cy Cz")?;
    for (i, s) in traj.states.iter().enumerate() {
        write!(out, "{:.17e}", traj.times[i])?;
        for b in s.bodies() {
            write!(
                out,
                " {:.17e} {:.17e} {:.17e}",
                b.position.x, b.position.y, b.position.z
            )?;
        }
        for b in s.bodies() {
            write!(
                out,
                " {:.17e} {:.17e} {:.17e}",
                b.momentum.x, b.momentum.y, b.momentum.z
            )?;
        }
        let c = traj.angular_momentum[i];
        writeln!(out, " {:.17e} {:.17e} {:.17e} {:.17e}", traj.energy[i], c.x, c.y, c.z)?;
    }
    Ok(())
}
