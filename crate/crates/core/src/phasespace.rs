//! Core phase-space types, fixed conventions, and the [`Chart`] abstraction.
//!
//! Conventions (fixed, not configurable):
//!
//! * State vectors are ordered momenta/actions first, then positions/angles:
//!   `(P_0, ..., P_{n-1}, Q_0, ..., Q_{n-1})`.
//! * Poisson bracket `{f, g} = Σ_i ∂f/∂P_i ∂g/∂Q_i − ∂f/∂Q_i ∂g/∂P_i`.
//! * Canonical matrix `Ω = [[0, I], [−I, 0]]` in that ordering, so
//!   `{f, g} = ∇f · Ω ∇g`.
//! * Equations of motion `Q̇ = ∂H/∂P`, `Ṗ = −∂H/∂Q`.
//! * The gravitational constant is 1.
//! * Angles are normalized to `[0, 2π)` on output; inputs are accepted at any
//!   real value and wrapped.
//!
//! With these choices `{action, conjugate angle} = +1` for every declared
//! pair of a certified chart.

use std::f64::consts::TAU;

use nalgebra::DMatrix;

use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};

/// Relative tolerance for chart round trips.
pub const ROUNDTRIP_TOL: f64 = 1e-10;

/// A Cartesian 3-vector over the scalar `T` (position or momentum, G = 1
/// units). The default `Vec3` is the `f64` instantiation used throughout
/// the public API; `Vec3<Dual>` drives the exact-derivative path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        let z = T::from_f64(0.0);
        Vec3 { x: z, y: z, z }
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    #[inline]
    pub fn normalized(self) -> Self {
        let n = self.norm();
        Vec3::new(self.x / n, self.y / n, self.z / n)
    }

    /// Rotation of `self` about the unit axis by `angle` (Rodrigues).
    pub fn rotated_about(self, axis: Self, angle: T) -> Self {
        let c = angle.cos();
        let s = angle.sin();
        let one = T::from_f64(1.0);
        let k = axis;
        self.scale(c) + k.cross(self).scale(s) + k.scale(k.dot(self) * (one - c))
    }
}

impl<T: Scalar> std::ops::Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> std::ops::Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> std::ops::Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Vec3<f64> {
    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unsigned angle to another vector, in `[0, π]`. Robust for near-parallel
    /// vectors (atan2 form, no acos cancellation).
    pub fn angle_to(self, o: Self) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }

    pub fn to_dual(self) -> Vec3<Dual> {
        Vec3::new(
            Dual::constant(self.x),
            Dual::constant(self.y),
            Dual::constant(self.z),
        )
    }
}

/// Wrap an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    a.wrap_angle()
}

/// Difference of two angles reduced to `(−π, π]`.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// Oriented angle from `u` to `v` measured in the plane with unit normal
/// `normal` (both `u` and `v` must lie in that plane), wrapped to `[0, 2π)`.
#[inline]
pub fn angle_in_plane<T: Scalar>(u: Vec3<T>, v: Vec3<T>, normal: Vec3<T>) -> T {
    wrap_angle(u.cross(v).dot(normal).atan2(u.dot(v)))
}

/// One body of a phase state: position and conjugate momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Body {
    pub position: Vec3,
    pub momentum: Vec3,
}

impl Body {
    pub fn new(position: Vec3, momentum: Vec3) -> Self {
        Body { position, momentum }
    }
}

/// Positions, momenta and masses of N ≥ 2 bodies in an inertial Cartesian
/// frame. Immutable after construction; all operations on it are pure.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    bodies: Vec<Body>,
    masses: Vec<f64>,
}

impl PhaseState {
    /// Validates: N ≥ 2, positive finite masses, finite coordinates, and
    /// pairwise distinct positions.
    pub fn new(bodies: Vec<Body>, masses: Vec<f64>) -> Result<Self> {
        if bodies.len() != masses.len() {
            return Err(Error::DimensionMismatch {
                expected: masses.len(),
                got: bodies.len(),
            });
        }
        if bodies.len() < 2 {
            return Err(Error::InvalidState(format!(
                "need at least 2 bodies, got {}",
                bodies.len()
            )));
        }
        for (j, m) in masses.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::NonFinite("mass"));
            }
            if *m <= 0.0 {
                return Err(Error::InvalidState(format!("mass {j} = {m} must be > 0")));
            }
        }
        for b in &bodies {
            if !b.position.is_finite() || !b.momentum.is_finite() {
                return Err(Error::NonFinite("body coordinates"));
            }
        }
        for i in 0..bodies.len() {
            for j in (i + 1)..bodies.len() {
                if (bodies[i].position - bodies[j].position).norm() == 0.0 {
                    return Err(Error::Collision { i, j });
                }
            }
        }
        Ok(PhaseState { bodies, masses })
    }

    pub fn n_bodies(&self) -> usize {
        self.bodies.len()
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.bodies
            .iter()
            .fold(Vec3::zero(), |s, b| s + b.momentum)
    }

    pub fn barycenter(&self) -> Vec3 {
        let m = self.total_mass();
        self.bodies
            .iter()
            .zip(&self.masses)
            .fold(Vec3::zero(), |s, (b, mi)| s + b.position.scale(*mi))
            .scale(1.0 / m)
    }

    /// Total angular momentum `Σ q_j × p_j`.
    pub fn angular_momentum(&self) -> Vec3 {
        self.bodies
            .iter()
            .fold(Vec3::zero(), |s, b| s + b.position.cross(b.momentum))
    }

    /// Flatten to `(p_0, ..., p_{N-1}, q_0, ..., q_{N-1})`, each vector in
    /// x, y, z order. Lossless.
    pub fn flatten(&self) -> Vec<f64> {
        let momenta: Vec<Vec3> = self.bodies.iter().map(|b| b.momentum).collect();
        let positions: Vec<Vec3> = self.bodies.iter().map(|b| b.position).collect();
        flatten_phase(&momenta, &positions)
    }

    /// Inverse of [`PhaseState::flatten`], bit-exact.
    pub fn from_flat(coords: &[f64], masses: Vec<f64>) -> Result<Self> {
        let n = masses.len();
        if coords.len() != 6 * n {
            return Err(Error::DimensionMismatch {
                expected: 6 * n,
                got: coords.len(),
            });
        }
        let (momenta, positions) = unflatten_phase(coords);
        let bodies = positions
            .into_iter()
            .zip(momenta)
            .map(|(q, p)| Body::new(q, p))
            .collect();
        PhaseState::new(bodies, masses)
    }

    /// Apply a rotation (given by its action on vectors) to all positions and
    /// momenta simultaneously.
    pub fn rotated(&self, rot: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        let bodies = self
            .bodies
            .iter()
            .map(|b| Body::new(rot(b.position), rot(b.momentum)))
            .collect();
        PhaseState::new(bodies, self.masses.clone())
    }
}

/// Flatten momenta then positions into one coordinate vector (Conventions
/// ordering). Works for any number of pairs.
pub fn flatten_phase(momenta: &[Vec3], positions: &[Vec3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(6 * momenta.len());
    for p in momenta {
        out.extend_from_slice(&[p.x, p.y, p.z]);
    }
    for q in positions {
        out.extend_from_slice(&[q.x, q.y, q.z]);
    }
    out
}

/// Split a flat coordinate vector back into (momenta, positions).
pub fn unflatten_phase(coords: &[f64]) -> (Vec<Vec3>, Vec<Vec3>) {
    let n = coords.len() / 6;
    let read = |s: &[f64]| -> Vec<Vec3> {
        s.chunks_exact(3)
            .map(|c| Vec3::new(c[0], c[1], c[2]))
            .collect()
    };
    (read(&coords[..3 * n]), read(&coords[3 * n..]))
}

/// Read a slice of scalars as 3-vectors (generic helper for chart bodies).
pub(crate) fn read_vec3s<T: Scalar>(s: &[T]) -> Vec<Vec3<T>> {
    s.chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect()
}

/// The canonical matrix `Ω = [[0, I], [−I, 0]]` for an even dimension.
pub fn canonical_matrix(dim: usize) -> DMatrix<f64> {
    assert!(dim % 2 == 0, "canonical matrix needs even dimension");
    let n = dim / 2;
    let mut omega = DMatrix::zeros(dim, dim);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    omega
}

/// The standard pairing for a target laid out actions-first:
/// `(i, dim/2 + i)`.
pub fn standard_pairing(dim: usize) -> Vec<(usize, usize)> {
    let n = dim / 2;
    (0..n).map(|i| (i, n + i)).collect()
}

pub(crate) type ForwardFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;
pub(crate) type ForwardDualFn = dyn Fn(&[Dual]) -> Result<Vec<Dual>> + Send + Sync;
type DomainFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A named, invertible coordinate map with a domain predicate and a declared
/// canonical pairing, consumed by the verification engine.
///
/// `forward` maps a flat source vector (canonical coordinates in Conventions
/// ordering) to a flat target vector; `inverse` goes back. `pairing` lists
/// the `(action index, angle index)` conjugate pairs of the target and must
/// cover every target index exactly once. Charts whose target carries a
/// vertical-component pair of the total angular momentum (`(H, h)`,
/// `(Φ₂, φ₂)`) declare it as the *last* pairing entry; the D-factor
/// measurement reads that pair.
pub struct Chart {
    name: String,
    dim: usize,
    forward: Box<ForwardFn>,
    inverse: Box<ForwardFn>,
    in_domain: Box<DomainFn>,
    pairing: Vec<(usize, usize)>,
    angular: Vec<bool>,
    forward_dual: Option<Box<ForwardDualFn>>,
}

impl Chart {
    /// Build a chart. `angle_targets` lists the target indices that are
    /// periodic angles (finite differences of those outputs are reduced
    /// mod 2π).
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        pairing: Vec<(usize, usize)>,
        angle_targets: &[usize],
        forward: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
        inverse: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
        in_domain: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        assert!(dim % 2 == 0 && dim > 0, "chart dimension must be even");
        let mut covered = vec![false; dim];
        for &(a, g) in &pairing {
            assert!(a < dim && g < dim && !covered[a] && !covered[g]);
            covered[a] = true;
            covered[g] = true;
        }
        assert!(
            covered.iter().all(|&c| c),
            "pairing must cover all {dim} indices exactly once"
        );
        let mut angular = vec![false; dim];
        for &i in angle_targets {
            angular[i] = true;
        }
        Chart {
            name: name.into(),
            dim,
            forward: Box::new(forward),
            inverse: Box::new(inverse),
            in_domain: Box::new(in_domain),
            pairing,
            angular,
            forward_dual: None,
        }
    }

    /// Attach the exact forward-mode derivative path.
    pub fn with_dual_forward(
        mut self,
        forward: impl Fn(&[Dual]) -> Result<Vec<Dual>> + Send + Sync + 'static,
    ) -> Self {
        self.forward_dual = Some(Box::new(forward));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairing(&self) -> &[(usize, usize)] {
        &self.pairing
    }

    /// Whether target coordinate `i` is a periodic angle.
    pub fn is_angular(&self, i: usize) -> bool {
        self.angular[i]
    }

    pub fn has_dual_forward(&self) -> bool {
        self.forward_dual.is_some()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        (self.forward)(x)
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        (self.inverse)(y)
    }

    pub fn forward_dual(&self, x: &[Dual]) -> Result<Vec<Dual>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        match &self.forward_dual {
            Some(f) => f(x),
            None => Err(Error::NoDualPath(self.name.clone())),
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.is_finite()) && (self.in_domain)(x)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("chart input"));
        }
        Ok(())
    }

    /// The identity chart in dimension `dim` (all second-half coordinates
    /// treated as positions, none angular).
    pub fn identity(dim: usize) -> Self {
        Chart::new(
            "identity",
            dim,
            standard_pairing(dim),
            &[],
            |x| Ok(x.to_vec()),
            |y| Ok(y.to_vec()),
            |_| true,
        )
        .with_dual_forward(|x| Ok(x.to_vec()))
    }
}

impl std::fmt::Debug for Chart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Chart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("pairing", &self.pairing)
            .finish()
    }
}

/// Compose two charts: `a` first, then `b`. Requires equal dimensions.
pub fn compose_charts(a: Chart, b: Chart) -> Result<Chart> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    let name = format!("{}∘{}", b.name, a.name);
    let dim = a.dim;
    let pairing = b.pairing.clone();
    let angular = b.angular.clone();

    let dual = match (&a.forward_dual, &b.forward_dual) {
        (Some(_), Some(_)) => true,
        _ => false,
    };

    let a = std::sync::Arc::new(a);
    let b = std::sync::Arc::new(b);
    let (af, bf) = (a.clone(), b.clone());
    let (ai, bi) = (a.clone(), b.clone());
    let (ad, bd) = (a.clone(), b.clone());
    let (adu, bdu) = (a.clone(), b.clone());

    let mut chart = Chart {
        name,
        dim,
        forward: Box::new(move |x| bf.forward(&af.forward(x)?)),
        inverse: Box::new(move |y| ai.inverse(&bi.inverse(y)?)),
        in_domain: Box::new(move |x| {
            ad.in_domain(x)
                && ad
                    .forward(x)
                    .map(|mid| bd.in_domain(&mid))
                    .unwrap_or(false)
        }),
        pairing,
        angular,
        forward_dual: None,
    };
    if dual {
        chart.forward_dual = Some(Box::new(move |x| adu.forward_dual(x).and_then(|m| bdu.forward_dual(&m))));
    }
    Ok(chart)
}
