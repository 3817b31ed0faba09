//! Reduction of the translation symmetry: Cartesian body coordinates ↔
//! hierarchical Jacobi coordinates for N ≥ 2, and the reduced Hamiltonian.
//!
//! The i-th Jacobi position is the position of body i relative to the
//! barycenter of bodies 0..i−1; the conjugate momenta are
//! `P_i = p_i + (m_i/η_i) Σ_{j>i} p_j` with `η_i = m_0 + ... + m_i`. For
//! three bodies this is exactly the classical transformation with
//! `σ_0 = m_0/(m_0+m_1)`, `σ_1 = m_1/(m_0+m_1)`. The dropped pair
//! `(P_0, Q_0) = (total momentum, q_0)` is preserved separately so the map
//! is lossless and fully canonical as a 6N-dimensional linear chart.
//!
//! Reduced-mass conventions: `μ_i = m_i η_{i-1}/η_i`, `M_i = η_i`, which
//! make the kinetic energy diagonal (`Σ |P_i|²/(2μ_i)` on the `P_0 = 0`
//! section) and each pair Keplerian at leading order.

use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::phasespace::{
    flatten_phase, read_vec3s, standard_pairing, unflatten_phase, Body, Chart, PhaseState, Vec3,
};

/// One Jacobi pair: fictitious-particle momentum and position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobiPair {
    pub momentum: Vec3,
    pub position: Vec3,
}

/// The pair dropped by the reduction: total linear momentum and the
/// position anchor (body 0). Keeping it makes the transformation lossless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DroppedPair {
    /// `P_0 = Σ p_j`.
    pub momentum: Vec3,
    /// `Q_0 = q_0`.
    pub position: Vec3,
}

/// Jacobi fictitious-particle phase variables after translation reduction,
/// together with the masses and the derived per-pair parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiState {
    pairs: Vec<JacobiPair>,
    masses: Vec<f64>,
    reduced_masses: Vec<f64>,
    grav_params: Vec<f64>,
}

impl JacobiState {
    pub fn new(pairs: Vec<JacobiPair>, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != pairs.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: pairs.len() + 1,
                got: masses.len(),
            });
        }
        if pairs.len() < 1 {
            return Err(Error::InvalidState("need at least one Jacobi pair".into()));
        }
        for m in &masses {
            if !m.is_finite() || *m <= 0.0 {
                return Err(Error::InvalidState(format!("mass {m} must be finite and > 0")));
            }
        }
        for pr in &pairs {
            if !pr.momentum.is_finite() || !pr.position.is_finite() {
                return Err(Error::NonFinite("Jacobi pair"));
            }
        }
        let (reduced_masses, grav_params) = mass_parameters(&masses);
        Ok(JacobiState {
            pairs,
            masses,
            reduced_masses,
            grav_params,
        })
    }

    /// Number of bodies N (one more than the number of pairs).
    pub fn n_bodies(&self) -> usize {
        self.masses.len()
    }

    pub fn pairs(&self) -> &[JacobiPair] {
        &self.pairs
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Reduced masses `μ_i`, one per pair.
    pub fn reduced_masses(&self) -> &[f64] {
        &self.reduced_masses
    }

    /// Gravitational parameters `M_i`, one per pair.
    pub fn grav_params(&self) -> &[f64] {
        &self.grav_params
    }

    /// Flatten to `(P_1..P_{N-1}, Q_1..Q_{N-1})` — the reduced coordinates,
    /// without the dropped pair.
    pub fn flatten(&self) -> Vec<f64> {
        let momenta: Vec<Vec3> = self.pairs.iter().map(|p| p.momentum).collect();
        let positions: Vec<Vec3> = self.pairs.iter().map(|p| p.position).collect();
        flatten_phase(&momenta, &positions)
    }

    pub fn from_flat(coords: &[f64], masses: Vec<f64>) -> Result<Self> {
        let k = masses.len() - 1;
        if coords.len() != 6 * k {
            return Err(Error::DimensionMismatch {
                expected: 6 * k,
                got: coords.len(),
            });
        }
        let (momenta, positions) = unflatten_phase(coords);
        let pairs = momenta
            .into_iter()
            .zip(positions)
            .map(|(p, q)| JacobiPair {
                momentum: p,
                position: q,
            })
            .collect();
        JacobiState::new(pairs, masses)
    }

    /// Apply a rotation to every pair simultaneously.
    pub fn rotated(&self, rot: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        let pairs = self
            .pairs
            .iter()
            .map(|p| JacobiPair {
                momentum: rot(p.momentum),
                position: rot(p.position),
            })
            .collect();
        JacobiState::new(pairs, self.masses.clone())
    }
}

/// `(μ_i, M_i)` for i = 1..N−1: `μ_i = m_i η_{i-1}/η_i`, `M_i = η_i`.
pub fn mass_parameters(masses: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut eta = Vec::with_capacity(masses.len());
    let mut acc = 0.0;
    for m in masses {
        acc += m;
        eta.push(acc);
    }
    let mu = (1..masses.len())
        .map(|i| masses[i] * eta[i - 1] / eta[i])
        .collect();
    let mgrav = (1..masses.len()).map(|i| eta[i]).collect();
    (mu, mgrav)
}

/// Generic forward body of the Cartesian → Jacobi map on a flat vector
/// `(p_0.., q_0..) → (P_0, P_1.., Q_0 = q_0, Q_1..)`.
pub(crate) fn jacobi_forward<T: Scalar>(src: &[T], masses: &[f64]) -> Result<Vec<T>> {
    let n = masses.len();
    if src.len() != 6 * n {
        return Err(Error::DimensionMismatch {
            expected: 6 * n,
            got: src.len(),
        });
    }
    let momenta = read_vec3s(&src[..3 * n]);
    let positions = read_vec3s(&src[3 * n..]);
    let mut eta = vec![0.0; n];
    let mut acc = 0.0;
    for (i, m) in masses.iter().enumerate() {
        acc += m;
        eta[i] = acc;
    }

    let mut out_p: Vec<Vec3<T>> = Vec::with_capacity(n);
    let mut out_q: Vec<Vec3<T>> = Vec::with_capacity(n);
    // P_0 = total momentum, Q_0 = q_0 (its exact conjugate).
    out_p.push(
        momenta
            .iter()
            .fold(Vec3::zero(), |s, p| s + *p),
    );
    out_q.push(positions[0]);
    let mut bary = positions[0];
    for i in 1..n {
        let q_rel = positions[i] - bary;
        out_q.push(q_rel);
        bary = bary + q_rel.scale(T::from_f64(masses[i] / eta[i]));
        let mut suffix = Vec3::zero();
        for p in momenta.iter().skip(i + 1) {
            suffix = suffix + *p;
        }
        out_p.push(momenta[i] + suffix.scale(T::from_f64(masses[i] / eta[i])));
    }

    let mut out = Vec::with_capacity(6 * n);
    for p in &out_p {
        out.extend_from_slice(&[p.x, p.y, p.z]);
    }
    for q in &out_q {
        out.extend_from_slice(&[q.x, q.y, q.z]);
    }
    Ok(out)
}

fn jacobi_inverse_flat(tgt: &[f64], masses: &[f64]) -> Result<Vec<f64>> {
    let (jp, jq) = unflatten_phase(tgt);
    let (positions, momenta) =
        reconstruct_bodies(&jp[1..], &jq[1..], masses, Some((jp[0], jq[0])));
    Ok(flatten_phase(&momenta, &positions))
}

/// Rebuild body positions/momenta from Jacobi pairs. `anchor` carries
/// `(P_0, Q_0)`; when absent the total momentum is zero and the barycenter
/// is placed at the origin.
fn reconstruct_bodies(
    jac_p: &[Vec3],
    jac_q: &[Vec3],
    masses: &[f64],
    anchor: Option<(Vec3, Vec3)>,
) -> (Vec<Vec3>, Vec<Vec3>) {
    let n = masses.len();
    let mut eta = vec![0.0; n];
    let mut acc = 0.0;
    for (i, m) in masses.iter().enumerate() {
        acc += m;
        eta[i] = acc;
    }
    let (p0, q0) = anchor.unwrap_or((Vec3::zero(), Vec3::zero()));

    let mut positions = vec![Vec3::zero(); n];
    positions[0] = q0;
    let mut bary = q0;
    for i in 1..n {
        positions[i] = bary + jac_q[i - 1];
        bary = bary + jac_q[i - 1].scale(masses[i] / eta[i]);
    }
    if anchor.is_none() {
        // shift the barycenter (currently at `bary`) to the origin
        for q in positions.iter_mut() {
            *q = *q - bary;
        }
    }

    let mut momenta = vec![Vec3::zero(); n];
    let mut suffix = Vec3::zero();
    for i in (1..n).rev() {
        momenta[i] = jac_p[i - 1] - suffix.scale(masses[i] / eta[i]);
        suffix = suffix + momenta[i];
    }
    momenta[0] = p0 - suffix;
    (positions, momenta)
}

/// Cartesian → Jacobi. The dropped pair is returned separately; together
/// with it the map is lossless. Works for any N ≥ 2.
pub fn to_jacobi(state: &PhaseState) -> (JacobiState, DroppedPair) {
    let flat = state.flatten();
    let out = jacobi_forward::<f64>(&flat, state.masses()).expect("valid state flattens cleanly");
    let (p, q) = unflatten_phase(&out);
    let dropped = DroppedPair {
        momentum: p[0],
        position: q[0],
    };
    let pairs = p[1..]
        .iter()
        .zip(&q[1..])
        .map(|(pp, qq)| JacobiPair {
            momentum: *pp,
            position: *qq,
        })
        .collect();
    let jac = JacobiState::new(pairs, state.masses().to_vec())
        .expect("valid state yields a valid Jacobi state");
    (jac, dropped)
}

/// Jacobi → Cartesian, the exact linear inverse of [`to_jacobi`]. With the
/// anchor omitted, reconstructs with zero total momentum and the barycenter
/// at the origin.
pub fn from_jacobi(jac: &JacobiState, anchor: Option<&DroppedPair>) -> Result<PhaseState> {
    let jp: Vec<Vec3> = jac.pairs.iter().map(|p| p.momentum).collect();
    let jq: Vec<Vec3> = jac.pairs.iter().map(|p| p.position).collect();
    let (positions, momenta) = reconstruct_bodies(
        &jp,
        &jq,
        &jac.masses,
        anchor.map(|a| (a.momentum, a.position)),
    );
    let bodies = positions
        .into_iter()
        .zip(momenta)
        .map(|(q, p)| Body::new(q, p))
        .collect();
    PhaseState::new(bodies, jac.masses.clone())
}

/// The translation-reduced Hamiltonian `F(P_1, Q_1, ..)`, evaluated as the
/// pullback of the Cartesian N-body Hamiltonian through [`from_jacobi`]
/// with `P_0 = 0`. Exact by construction for every N.
pub fn reduced_hamiltonian(jac: &JacobiState) -> Result<f64> {
    let state = from_jacobi(jac, None)?;
    crate::dynamics::hamiltonian(&state)
}

/// Closed-form fast path of [`reduced_hamiltonian`] for N = 3:
/// `|P₁|²/(2μ₁) + |P₂|²/(2μ₂) − m₀m₁/|Q₁| − m₀m₂/|Q₂+σ₁Q₁| − m₁m₂/|Q₂−σ₀Q₁|`.
pub fn reduced_hamiltonian_closed3(jac: &JacobiState) -> Result<f64> {
    if jac.n_bodies() != 3 {
        return Err(Error::Unsupported(format!(
            "closed-form reduced Hamiltonian needs N = 3, got N = {}",
            jac.n_bodies()
        )));
    }
    let (m0, m1, m2) = (jac.masses[0], jac.masses[1], jac.masses[2]);
    let sigma0 = m0 / (m0 + m1);
    let sigma1 = m1 / (m0 + m1);
    let (p1, q1) = (jac.pairs[0].momentum, jac.pairs[0].position);
    let (p2, q2) = (jac.pairs[1].momentum, jac.pairs[1].position);
    let r01 = q1.norm();
    let r02 = (q2 + q1.scale(sigma1)).norm();
    let r12 = (q2 - q1.scale(sigma0)).norm();
    for (d, i, j) in [(r01, 0usize, 1usize), (r02, 0, 2), (r12, 1, 2)] {
        if d <= 0.0 {
            return Err(Error::Collision { i, j });
        }
    }
    let mu1 = jac.reduced_masses[0];
    let mu2 = jac.reduced_masses[1];
    Ok(p1.norm_squared() / (2.0 * mu1) + p2.norm_squared() / (2.0 * mu2)
        - m0 * m1 / r01
        - m0 * m2 / r02
        - m1 * m2 / r12)
}

/// The full Cartesian → Jacobi chart for the given masses, dimension 6N,
/// including the `(P_0, Q_0)` anchor pair. Exactly canonical (linear point
/// transformation).
pub fn jacobi_chart(masses: &[f64]) -> Chart {
    let n = masses.len();
    let name = format!("jacobi{n}");
    let m1 = masses.to_vec();
    let m2 = masses.to_vec();
    let m3 = masses.to_vec();
    Chart::new(
        name,
        6 * n,
        standard_pairing(6 * n),
        &[],
        move |x| jacobi_forward::<f64>(x, &m1),
        move |y| jacobi_inverse_flat(y, &m2),
        |_| true,
    )
    .with_dual_forward(move |x: &[Dual]| jacobi_forward::<Dual>(x, &m3))
}
