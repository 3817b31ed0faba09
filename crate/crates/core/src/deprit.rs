//! Deprit variables for 3-body and N-body Jacobi states, Jacobi's
//! elimination of the nodes, and the forward/inverse charts.
//!
//! For K = N−1 ellipses with angular momenta `c⃗_i = Q_i × P_i` and partial
//! sums `S⃗_j = c⃗_1 + … + c⃗_j`, the construction proceeds level by level:
//! at level j the subsystem `S⃗_{j-1}` and ellipse j merge into `S⃗_j`, and
//! the node line `ν_j ∝ c⃗_j × S⃗_{j-1}` (the common node of the subsystem's
//! invariable plane and the j-th orbit plane, oriented by the ascending node
//! of the subsystem side) carries the angles:
//!
//! * `ḡ_j` — pericenter of ellipse j from `ν_j`, in its orbit plane
//!   (`ḡ_1` is measured from `ν_2`, the 3-body convention where both
//!   pericenter angles share the single node line),
//! * `ψ_j` — node angle from `ν_{j+1}` to `ν_j` around `Ŝ_j` for the
//!   intermediate levels, paired with `Ψ_j = |S⃗_j|`,
//! * `φ_1` — from `ν_T = ẑ × Ĉ` (the node of the Laplace plane in the
//!   reference plane; this orientation is a fixed choice) to `ν_K`, paired
//!   with `Φ_1 = |C⃗|`,
//! * `φ_2` — from the x-axis to `ν_T`, paired with `Φ_2 = C_z`.
//!
//! The chart degenerates exactly where a node line vanishes: vertical total
//! angular momentum, coplanar adjacent subsystems, or a circular ellipse.
//! Those loci are rejected with the corresponding error.

use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::jacobi::{from_jacobi, mass_parameters, JacobiState};
use crate::kepler::{assemble_ellipse, orbit_geometry, CIRCULAR_TOL};
use crate::phasespace::{
    angle_in_plane, flatten_phase, read_vec3s, standard_pairing, wrap_angle, Chart, Vec3,
};

/// `|ẑ × Ĉ|` below which the total angular momentum counts as vertical.
pub const VERTICAL_TOL: f64 = 1e-9;
/// Normalized node length below which two merged planes count as coplanar.
pub const COPLANAR_TOL: f64 = 1e-9;

/// Vertical components of the two partial angular momenta with respect to
/// the Laplace plane, from Jacobi's elimination of the nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodesResult {
    pub h1: f64,
    pub h2: f64,
}

/// Jacobi's elimination of the nodes:
/// `H1 = (C² + G1² − G2²)/(2C)`, `H2 = (C² + G2² − G1²)/(2C)`.
/// Requires `C > 0` and the triangle inequality `|G1−G2| ≤ C ≤ G1+G2`
/// (equivalently `|H_i| ≤ G_i`).
///
/// `H2` is evaluated as `C − H1`, which is the same number algebraically
/// and pins the identity `H1 + H2 = C` to one rounding.
pub fn eliminate_nodes(g1: f64, g2: f64, c: f64) -> Result<NodesResult> {
    if !(g1.is_finite() && g2.is_finite() && c.is_finite()) {
        return Err(Error::NonFinite("eliminate_nodes input"));
    }
    if c <= 0.0 {
        return Err(Error::NodesSingular { c });
    }
    if g1 <= 0.0 || g2 <= 0.0 {
        return Err(Error::InvalidElements(format!(
            "angular momenta G1 = {g1}, G2 = {g2} must be > 0"
        )));
    }
    if c > g1 + g2 || c < (g1 - g2).abs() {
        return Err(Error::TriangleViolation { g1, g2, c });
    }
    let h1 = (c * c + g1 * g1 - g2 * g2) / (2.0 * c);
    Ok(NodesResult { h1, h2: c - h1 })
}

/// Per-ellipse angular momenta `c⃗_i = Q_i × P_i` and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularMomenta {
    pub per_ellipse: Vec<Vec3>,
    pub total: Vec3,
}

pub fn angular_momenta(jac: &JacobiState) -> AngularMomenta {
    let per_ellipse: Vec<Vec3> = jac
        .pairs()
        .iter()
        .map(|p| p.position.cross(p.momentum))
        .collect();
    let total = per_ellipse
        .iter()
        .fold(Vec3::zero(), |acc, c| acc + *c);
    AngularMomenta { per_ellipse, total }
}

/// One per-ellipse Deprit block `(L, l, G, ḡ)`.
#[allow(non_snake_case)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepritBlock {
    pub L: f64,
    pub l: f64,
    pub G: f64,
    pub g_bar: f64,
}

/// Intermediate chain pair: partial angular-momentum norm and its node angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainPair {
    pub norm: f64,
    pub angle: f64,
}

/// Deprit coordinates of K = N−1 coupled ellipses: per-ellipse blocks, the
/// intermediate chain pairs `(Ψ_j, ψ_j)` for j = 2..K−1, and the two top
/// pairs `(Φ_1, φ_1) = (|C⃗|, node angle in the Laplace plane)` and
/// `(Φ_2, φ_2) = (C_z, node angle in the reference plane)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepritState {
    blocks: Vec<DepritBlock>,
    chain: Vec<ChainPair>,
    c_norm: f64,
    laplace_node_angle: f64,
    c_z: f64,
    reference_node_angle: f64,
    masses: Vec<f64>,
}

impl DepritState {
    /// Validates the action invariants (positivity, `G ≤ L`, `|Φ_2| ≤ Φ_1`
    /// and the triangle inequalities along the chain) and wraps all angles
    /// into `[0, 2π)`.
    pub fn new(
        blocks: Vec<DepritBlock>,
        chain: Vec<ChainPair>,
        c_norm: f64,
        laplace_node_angle: f64,
        c_z: f64,
        reference_node_angle: f64,
        masses: Vec<f64>,
    ) -> Result<Self> {
        let k = blocks.len();
        if k < 2 {
            return Err(Error::Unsupported(format!(
                "Deprit coordinates need at least two ellipses, got {k}"
            )));
        }
        if masses.len() != k + 1 {
            return Err(Error::DimensionMismatch {
                expected: k + 1,
                got: masses.len(),
            });
        }
        if chain.len() != k - 2 {
            return Err(Error::DimensionMismatch {
                expected: k - 2,
                got: chain.len(),
            });
        }
        let all = blocks
            .iter()
            .flat_map(|b| [b.L, b.l, b.G, b.g_bar])
            .chain(chain.iter().flat_map(|c| [c.norm, c.angle]))
            .chain([c_norm, laplace_node_angle, c_z, reference_node_angle]);
        for v in all {
            if !v.is_finite() {
                return Err(Error::NonFinite("Deprit coordinate"));
            }
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.L <= 0.0 || b.G <= 0.0 || b.G > b.L * (1.0 + 1e-12) {
                return Err(Error::InvalidElements(format!(
                    "block {}: need 0 < G ≤ L, got L = {}, G = {}",
                    i + 1,
                    b.L,
                    b.G
                )));
            }
        }
        if c_norm <= 0.0 {
            return Err(Error::InvalidElements(format!(
                "Φ1 = {c_norm} must be > 0"
            )));
        }
        if c_z.abs() > c_norm * (1.0 + 1e-12) {
            return Err(Error::InvalidElements(format!(
                "|Φ2| = {} exceeds Φ1 = {c_norm}",
                c_z.abs()
            )));
        }
        // chain triangle inequalities, level by level
        let mut prev = blocks[0].G;
        for j in 2..=k {
            let g = blocks[j - 1].G;
            let total = if j == k {
                c_norm
            } else {
                chain[j - 2].norm
            };
            if total > (prev + g) * (1.0 + 1e-12) || total < (prev - g).abs() * (1.0 - 1e-12) {
                return Err(Error::TriangleViolation {
                    g1: prev,
                    g2: g,
                    c: total,
                });
            }
            prev = total;
        }
        let blocks = blocks
            .into_iter()
            .map(|b| DepritBlock {
                L: b.L,
                l: wrap_angle(b.l),
                G: b.G,
                g_bar: wrap_angle(b.g_bar),
            })
            .collect();
        let chain = chain
            .into_iter()
            .map(|c| ChainPair {
                norm: c.norm,
                angle: wrap_angle(c.angle),
            })
            .collect();
        Ok(DepritState {
            blocks,
            chain,
            c_norm,
            laplace_node_angle: wrap_angle(laplace_node_angle),
            c_z,
            reference_node_angle: wrap_angle(reference_node_angle),
            masses,
        })
    }

    /// Number of ellipses K = N−1.
    pub fn n_ellipses(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[DepritBlock] {
        &self.blocks
    }

    pub fn chain(&self) -> &[ChainPair] {
        &self.chain
    }

    /// `Φ_1 = |C⃗|`.
    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    /// `φ_1`, the angle from `ν_T` to the top node line.
    pub fn laplace_node_angle(&self) -> f64 {
        self.laplace_node_angle
    }

    /// `Φ_2 = C_z`.
    pub fn c_z(&self) -> f64 {
        self.c_z
    }

    /// `φ_2`, the angle from the x-axis to `ν_T`.
    pub fn reference_node_angle(&self) -> f64 {
        self.reference_node_angle
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `φ_1 + φ_2 (mod 2π)`. Near the vertical degeneracy the two node
    /// angles lose individual meaning while their sum stays well defined;
    /// exposed for diagnostics only, with no chart claim there.
    pub fn node_angle_sum(&self) -> f64 {
        wrap_angle(self.laplace_node_angle + self.reference_node_angle)
    }

    /// Human-readable warnings for margins within 1e−6 of a chart boundary.
    pub fn degeneracy_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let ecc_sq = 1.0 - (b.G / b.L).powi(2);
            if ecc_sq < 1e-12 {
                warnings.push(format!("ellipse {} is near-circular", i + 1));
            }
        }
        let sin_vert_sq = 1.0 - (self.c_z / self.c_norm).powi(2);
        if sin_vert_sq < 1e-12 {
            warnings.push("total angular momentum is near-vertical (VerticalC)".into());
        }
        let mut prev = self.blocks[0].G;
        for j in 2..=self.blocks.len() {
            let g = self.blocks[j - 1].G;
            let total = if j == self.blocks.len() {
                self.c_norm
            } else {
                self.chain[j - 2].norm
            };
            let slack = ((prev + g) - total).min(total - (prev - g).abs());
            if slack < 1e-6 * total {
                warnings.push(format!(
                    "angular momenta nearly coplanar at level {j} (CoplanarOrbits)"
                ));
            }
            prev = total;
        }
        warnings
    }

    /// Flatten to Conventions ordering:
    /// `(L_1..L_K, G_1..G_K, Ψ_2..Ψ_{K-1}, Φ_1, Φ_2,
    ///   l_1..l_K, ḡ_1..ḡ_K, ψ_2..ψ_{K-1}, φ_1, φ_2)`.
    pub fn flatten(&self) -> Vec<f64> {
        let k = self.blocks.len();
        let mut out = Vec::with_capacity(6 * k);
        out.extend(self.blocks.iter().map(|b| b.L));
        out.extend(self.blocks.iter().map(|b| b.G));
        out.extend(self.chain.iter().map(|c| c.norm));
        out.push(self.c_norm);
        out.push(self.c_z);
        out.extend(self.blocks.iter().map(|b| b.l));
        out.extend(self.blocks.iter().map(|b| b.g_bar));
        out.extend(self.chain.iter().map(|c| c.angle));
        out.push(self.laplace_node_angle);
        out.push(self.reference_node_angle);
        out
    }

    /// Inverse of [`DepritState::flatten`].
    pub fn from_flat(coords: &[f64], masses: Vec<f64>) -> Result<Self> {
        let k = masses.len() - 1;
        if coords.len() != 6 * k {
            return Err(Error::DimensionMismatch {
                expected: 6 * k,
                got: coords.len(),
            });
        }
        let half = 3 * k;
        let blocks = (0..k)
            .map(|i| DepritBlock {
                L: coords[i],
                l: coords[half + i],
                G: coords[k + i],
                g_bar: coords[half + k + i],
            })
            .collect();
        let chain = (0..k.saturating_sub(2))
            .map(|j| ChainPair {
                norm: coords[2 * k + j],
                angle: coords[half + 2 * k + j],
            })
            .collect();
        DepritState::new(
            blocks,
            chain,
            coords[half - 2],
            coords[6 * k - 2],
            coords[half - 1],
            coords[6 * k - 1],
            masses,
        )
    }
}

/// Forward body of the Jacobi → Deprit map on a flat reduced vector.
pub(crate) fn deprit_forward<T: Scalar>(src: &[T], mu: &[f64], mgrav: &[f64]) -> Result<Vec<T>> {
    let k = mu.len();
    if k < 2 {
        return Err(Error::Unsupported(format!(
            "Deprit chart needs at least two ellipses, got {k}"
        )));
    }
    if src.len() != 6 * k {
        return Err(Error::DimensionMismatch {
            expected: 6 * k,
            got: src.len(),
        });
    }
    let momenta = read_vec3s(&src[..3 * k]);
    let positions = read_vec3s(&src[3 * k..]);

    let mut geos = Vec::with_capacity(k);
    for i in 0..k {
        let geo = orbit_geometry(positions[i], momenta[i], mu[i], mgrav[i], i + 1)?;
        if geo.flags.circular {
            return Err(Error::Circular {
                ellipse: i + 1,
                e: geo.e.value(),
            });
        }
        geos.push(geo);
    }
    let c_vecs: Vec<Vec3<T>> = (0..k).map(|i| positions[i].cross(momenta[i])).collect();

    // partial sums S_j = c_1 + ... + c_j, 1-based storage
    let mut partial: Vec<Vec3<T>> = Vec::with_capacity(k + 1);
    partial.push(Vec3::zero()); // unused slot 0
    partial.push(c_vecs[0]);
    for j in 2..=k {
        let s = partial[j - 1] + c_vecs[j - 1];
        partial.push(s);
    }
    for j in 1..=k {
        if partial[j].norm().value() <= 0.0 {
            return Err(Error::ZeroAngularMomentum { level: j });
        }
    }

    // node lines ν_j = unit(c_j × S_{j-1}) for j = 2..K
    let mut nodes: Vec<Vec3<T>> = vec![Vec3::zero(); k + 1];
    for j in 2..=k {
        let raw = c_vecs[j - 1].cross(partial[j - 1]);
        let sin_mutual = raw.norm() / (c_vecs[j - 1].norm() * partial[j - 1].norm());
        if sin_mutual.value() < COPLANAR_TOL {
            return Err(Error::CoplanarOrbits {
                level: j,
                sin_angle: sin_mutual.value(),
            });
        }
        nodes[j] = raw.normalized();
    }

    let total = partial[k];
    let c_norm = total.norm();
    let c_hat = total.scale(T::from_f64(1.0) / c_norm);
    let zero = T::from_f64(0.0);
    let one = T::from_f64(1.0);
    let z_hat = Vec3::new(zero, zero, one);
    let tilt = z_hat.cross(c_hat);
    let sin_vert = tilt.norm();
    if sin_vert.value() < VERTICAL_TOL {
        return Err(Error::VerticalC {
            sin_angle: sin_vert.value(),
        });
    }
    let nu_t = tilt.scale(one / sin_vert);

    let mut out = Vec::with_capacity(6 * k);
    out.extend(geos.iter().map(|g| g.l_action));
    out.extend(geos.iter().map(|g| g.g_action));
    for j in 2..k {
        out.push(partial[j].norm());
    }
    out.push(c_norm);
    out.push(total.z);
    out.extend(geos.iter().map(|g| g.mean_anom));
    for i in 0..k {
        let node = if i == 0 { nodes[2] } else { nodes[i + 1] };
        out.push(angle_in_plane(node, geos[i].e_hat, geos[i].c_hat));
    }
    for j in 2..k {
        let s_hat = partial[j].normalized();
        out.push(angle_in_plane(nodes[j + 1], nodes[j], s_hat));
    }
    out.push(angle_in_plane(nu_t, nodes[k], c_hat));
    out.push(wrap_angle(c_hat.x.atan2(-c_hat.y)));
    Ok(out)
}

/// Inverse body: flat Deprit vector → flat reduced Jacobi vector.
pub(crate) fn deprit_inverse(tgt: &[f64], mu: &[f64], mgrav: &[f64]) -> Result<Vec<f64>> {
    let k = mu.len();
    if tgt.len() != 6 * k {
        return Err(Error::DimensionMismatch {
            expected: 6 * k,
            got: tgt.len(),
        });
    }
    let half = 3 * k;
    let l_actions = &tgt[0..k];
    let g_actions = &tgt[k..2 * k];
    let chain_norms = &tgt[2 * k..3 * k - 2];
    let (c_norm, c_z) = (tgt[half - 2], tgt[half - 1]);
    let mean_anoms = &tgt[half..half + k];
    let g_bars = &tgt[half + k..half + 2 * k];
    let chain_angles = &tgt[half + 2 * k..6 * k - 2];
    let (phi1_angle, phi2_angle) = (tgt[6 * k - 2], tgt[6 * k - 1]);

    if c_norm <= 0.0 {
        return Err(Error::InvalidElements(format!("Φ1 = {c_norm} must be > 0")));
    }
    let cos_vert = c_z / c_norm;
    if cos_vert.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidElements(format!(
            "|Φ2| = {} exceeds Φ1 = {c_norm}",
            c_z.abs()
        )));
    }
    let sin_vert = (1.0 - cos_vert * cos_vert).max(0.0).sqrt();
    if sin_vert < VERTICAL_TOL {
        return Err(Error::VerticalC {
            sin_angle: sin_vert,
        });
    }
    let (sin_p2, cos_p2) = phi2_angle.sin_cos();
    let c_hat = Vec3::new(sin_vert * sin_p2, -sin_vert * cos_p2, cos_vert);
    let nu_t = Vec3::new(cos_p2, sin_p2, 0.0);

    let mut node = nu_t.rotated_about(c_hat, phi1_angle);
    let mut s_vec = c_hat.scale(c_norm);

    let mut out_q = vec![Vec3::zero(); k];
    let mut out_p = vec![Vec3::zero(); k];

    for j in (2..=k).rev() {
        let s_norm = s_vec.norm();
        let s_hat = s_vec.scale(1.0 / s_norm);
        let g_j = g_actions[j - 1];
        let sub_norm = if j == 2 { g_actions[0] } else { chain_norms[j - 3] };
        let nodes = eliminate_nodes(sub_norm, g_j, s_norm)?;
        let cos_sub = (nodes.h1 / sub_norm).clamp(-1.0, 1.0);
        let cos_ell = (nodes.h2 / g_j).clamp(-1.0, 1.0);
        let sin_sub = (1.0 - cos_sub * cos_sub).max(0.0).sqrt();
        let sin_ell = (1.0 - cos_ell * cos_ell).max(0.0).sqrt();
        if sin_sub < COPLANAR_TOL || sin_ell < COPLANAR_TOL {
            return Err(Error::CoplanarOrbits {
                level: j,
                sin_angle: sin_sub.min(sin_ell),
            });
        }
        let w = s_hat.cross(node);
        // ascending node of the subsystem side sits at +ν_j, the ellipse's
        // at −ν_j (3-body inner/outer convention, applied per level)
        let c_hat_j = s_hat.scale(cos_ell) + w.scale(sin_ell);
        let s_hat_sub = s_hat.scale(cos_sub) - w.scale(sin_sub);
        let (q, p) = place_ellipse(
            l_actions[j - 1],
            g_j,
            mean_anoms[j - 1],
            g_bars[j - 1],
            node,
            c_hat_j,
            mu[j - 1],
            mgrav[j - 1],
            j,
        )?;
        out_q[j - 1] = q;
        out_p[j - 1] = p;
        s_vec = s_hat_sub.scale(sub_norm);
        if j > 2 {
            node = node.rotated_about(s_hat_sub, chain_angles[j - 3]);
        }
    }

    let c_hat_1 = s_vec.normalized();
    let (q1, p1) = place_ellipse(
        l_actions[0],
        g_actions[0],
        mean_anoms[0],
        g_bars[0],
        node,
        c_hat_1,
        mu[0],
        mgrav[0],
        1,
    )?;
    out_q[0] = q1;
    out_p[0] = p1;

    Ok(flatten_phase(&out_p, &out_q))
}

/// Place one ellipse: pericenter at `g_bar` from the node line within the
/// plane of normal `c_hat`.
#[allow(clippy::too_many_arguments)]
fn place_ellipse(
    l_action: f64,
    g_action: f64,
    mean_anom: f64,
    g_bar: f64,
    node: Vec3,
    c_hat: Vec3,
    mu: f64,
    mgrav: f64,
    ellipse: usize,
) -> Result<(Vec3, Vec3)> {
    if l_action <= 0.0 || g_action <= 0.0 || g_action > l_action * (1.0 + 1e-12) {
        return Err(Error::InvalidElements(format!(
            "ellipse {ellipse}: need 0 < G ≤ L, got L = {l_action}, G = {g_action}"
        )));
    }
    let a = l_action * l_action / (mu * mu * mgrav);
    let ecc = (1.0 - (g_action / l_action).powi(2)).max(0.0).sqrt();
    if ecc < CIRCULAR_TOL {
        return Err(Error::Circular { ellipse, e: ecc });
    }
    let e_hat = node.scale(g_bar.cos()) + c_hat.cross(node).scale(g_bar.sin());
    assemble_ellipse(a, ecc, mean_anom, e_hat, c_hat, mu, mgrav)
}

/// Jacobi → Deprit for any N ≥ 3. Degeneracies are reported with the
/// offending induction level.
pub fn to_deprit_n(jac: &JacobiState) -> Result<DepritState> {
    let (mu, mgrav) = (jac.reduced_masses(), jac.grav_params());
    let flat = jac.flatten();
    let out = deprit_forward::<f64>(&flat, mu, mgrav)?;
    DepritState::from_flat(&out, jac.masses().to_vec())
}

/// Deprit → Jacobi, the inverse of [`to_deprit_n`].
pub fn from_deprit_n(state: &DepritState) -> Result<JacobiState> {
    let (mu, mgrav) = mass_parameters(state.masses());
    let flat = state.flatten();
    let out = deprit_inverse(&flat, &mu, &mgrav)?;
    JacobiState::from_flat(&out, state.masses().to_vec())
}

/// Three-body Deprit variables (N = 3). Same code path as [`to_deprit_n`].
pub fn to_deprit(jac: &JacobiState) -> Result<DepritState> {
    if jac.n_bodies() != 3 {
        return Err(Error::Unsupported(format!(
            "to_deprit expects N = 3, got N = {}; use to_deprit_n",
            jac.n_bodies()
        )));
    }
    to_deprit_n(jac)
}

/// Inverse of [`to_deprit`] (N = 3).
pub fn from_deprit(state: &DepritState) -> Result<JacobiState> {
    if state.masses().len() != 3 {
        return Err(Error::Unsupported(format!(
            "from_deprit expects N = 3, got N = {}; use from_deprit_n",
            state.masses().len()
        )));
    }
    from_deprit_n(state)
}

/// The Jacobi → Deprit chart for the given masses: source is the flat
/// reduced Jacobi vector `(P_1.., Q_1..)`, target the flat Deprit vector.
/// The `(Φ_2, φ_2)` pair is declared last.
pub fn deprit_chart(masses: &[f64]) -> Chart {
    let k = masses.len() - 1;
    let name = format!("deprit{}", masses.len());
    let (mu, mgrav) = mass_parameters(masses);
    let (mu_f, mg_f) = (mu.clone(), mgrav.clone());
    let (mu_i, mg_i) = (mu.clone(), mgrav.clone());
    let (mu_d, mg_d) = (mu.clone(), mgrav.clone());
    let (mu_dom, mg_dom) = (mu, mgrav);
    let angles: Vec<usize> = (3 * k..6 * k).collect();
    Chart::new(
        name,
        6 * k,
        standard_pairing(6 * k),
        &angles,
        move |x| deprit_forward::<f64>(x, &mu_f, &mg_f),
        move |y| deprit_inverse(y, &mu_i, &mg_i),
        move |x| deprit_forward::<f64>(x, &mu_dom, &mg_dom).is_ok(),
    )
    .with_dual_forward(move |x: &[Dual]| deprit_forward::<Dual>(x, &mu_d, &mg_d))
}

/// Reconstruct the N-body phase state a Deprit state describes (zero total
/// momentum, barycenter at the origin).
pub fn deprit_to_phase(state: &DepritState) -> Result<crate::phasespace::PhaseState> {
    from_jacobi(&from_deprit_n(state)?, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::JacobiPair;
    use crate::phasespace::angle_diff;
    use std::f64::consts::TAU;

    pub(crate) const MASSES3: [f64; 3] = [1.0, 0.6, 0.4];

    fn sample_state3() -> DepritState {
        DepritState::new(
            vec![
                DepritBlock {
                    L: 1.2,
                    l: 0.7,
                    G: 1.05,
                    g_bar: 2.1,
                },
                DepritBlock {
                    L: 1.5,
                    l: 4.0,
                    G: 1.2,
                    g_bar: 5.3,
                },
            ],
            vec![],
            1.9,
            1.3,
            0.8,
            2.6,
            MASSES3.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn eliminate_nodes_direct_substitution() {
        let r = eliminate_nodes(1.5, 1.0, 2.0).unwrap();
        assert_eq!(r.h1, 1.3125);
        assert_eq!(r.h2, 0.6875);
        assert_eq!(r.h1 + r.h2, 2.0);
    }

    #[test]
    fn complement_matches_displayed_formula() {
        // H2 = C − H1 against its own displayed form
        for (g1, g2, c) in [(1.5, 1.0, 2.0), (0.3, 1.1, 1.2), (0.9, 0.7, 0.4)] {
            let r = eliminate_nodes(g1, g2, c).unwrap();
            let displayed = (c * c + g2 * g2 - g1 * g1) / (2.0 * c);
            assert!((r.h2 - displayed).abs() < 1e-13 * c.max(1.0));
        }
    }

    #[test]
    fn eliminate_nodes_symmetry() {
        let r = eliminate_nodes(0.8, 0.8, 1.1).unwrap();
        assert!((r.h1 - 0.55).abs() < 1e-15);
        assert!((r.h2 - 0.55).abs() < 1e-15);
    }

    #[test]
    fn eliminate_nodes_rejects_triangle_violation() {
        assert!(matches!(
            eliminate_nodes(1.0, 1.0, 3.0),
            Err(Error::TriangleViolation { .. })
        ));
        assert!(matches!(
            eliminate_nodes(1.0, 0.2, 0.3),
            Err(Error::TriangleViolation { .. })
        ));
        assert!(matches!(
            eliminate_nodes(1.0, 1.0, 0.0),
            Err(Error::NodesSingular { .. })
        ));
    }

    #[test]
    fn nodes_sum_identity_on_grid() {
        for i in 1..20 {
            for j in 1..20 {
                let (g1, g2) = (0.1 * i as f64, 0.1 * j as f64);
                let lo = (g1 - g2).abs();
                let hi = g1 + g2;
                for t in 1..10 {
                    let c = lo + (hi - lo) * t as f64 / 10.0;
                    if c <= 0.0 {
                        continue;
                    }
                    let r = eliminate_nodes(g1, g2, c).unwrap();
                    assert!(
                        (r.h1 + r.h2 - c).abs() < 1e-15 * c.max(1.0),
                        "identity violated at {g1} {g2} {c}"
                    );
                    assert!(r.h1.abs() <= g1 + 1e-12 && r.h2.abs() <= g2 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn angular_momenta_basics() {
        let jac = JacobiState::new(
            vec![
                JacobiPair {
                    momentum: Vec3::new(0.0, 1.0, 0.0),
                    position: Vec3::new(1.0, 0.0, 0.0),
                },
                JacobiPair {
                    momentum: Vec3::zero(),
                    position: Vec3::new(0.0, 2.0, 0.0),
                },
            ],
            MASSES3.to_vec(),
        )
        .unwrap();
        let am = angular_momenta(&jac);
        assert_eq!(am.per_ellipse[0], Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(am.per_ellipse[1], Vec3::zero());
        assert_eq!(am.total, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn total_angular_momentum_matches_bodies() {
        let state = sample_state3();
        let jac = from_deprit(&state).unwrap();
        let am = angular_momenta(&jac);
        let bodies = from_jacobi(&jac, None).unwrap();
        let direct = bodies.angular_momentum();
        assert!((am.total - direct).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn roundtrip_three_body() {
        let state = sample_state3();
        let jac = from_deprit(&state).unwrap();
        let back = to_deprit(&jac).unwrap();
        let (a, b) = (state.flatten(), back.flatten());
        for i in 0..a.len() {
            let d = if i >= 6 {
                angle_diff(a[i], b[i]).abs()
            } else {
                (a[i] - b[i]).abs()
            };
            assert!(d < 1e-9, "coordinate {i}: {} vs {}", a[i], b[i]);
        }
    }

    #[test]
    fn reconstructed_invariants_match_actions() {
        let state = sample_state3();
        let jac = from_deprit(&state).unwrap();
        let am = angular_momenta(&jac);
        assert!((am.total.norm() - state.c_norm()).abs() < 1e-10);
        assert!((am.total.z - state.c_z()).abs() < 1e-10);
        // Φ2/Φ1 = cos(inclination of the Laplace plane)
        let cos_incl = am.total.normalized().z;
        assert!((state.c_z() / state.c_norm() - cos_incl).abs() < 1e-12);
    }

    #[test]
    fn geometric_projections_match_node_elimination() {
        let state = sample_state3();
        let jac = from_deprit(&state).unwrap();
        let am = angular_momenta(&jac);
        let c_hat = am.total.normalized();
        let g1 = am.per_ellipse[0].norm();
        let g2 = am.per_ellipse[1].norm();
        let nodes = eliminate_nodes(g1, g2, am.total.norm()).unwrap();
        assert!((am.per_ellipse[0].dot(c_hat) - nodes.h1).abs() < 1e-10);
        assert!((am.per_ellipse[1].dot(c_hat) - nodes.h2).abs() < 1e-10);
    }

    #[test]
    fn rotation_about_z_shifts_reference_angle_only() {
        let state = sample_state3();
        let jac = from_deprit(&state).unwrap();
        let alpha = 0.9;
        let rot = |v: Vec3| {
            Vec3::new(
                alpha.cos() * v.x - alpha.sin() * v.y,
                alpha.sin() * v.x + alpha.cos() * v.y,
                v.z,
            )
        };
        let rotated = to_deprit(&jac.rotated(rot).unwrap()).unwrap();
        let (a, b) = (state.flatten(), rotated.flatten());
        for i in 0..12 {
            if i == 11 {
                assert!(
                    angle_diff(b[i], a[i] + alpha).abs() < 1e-10,
                    "φ2 must shift by α"
                );
            } else if i >= 6 {
                assert!(angle_diff(a[i], b[i]).abs() < 1e-10, "angle {i} moved");
            } else {
                assert!((a[i] - b[i]).abs() < 1e-10, "action {i} moved");
            }
        }
    }

    #[test]
    fn rotation_about_total_momentum_shifts_laplace_angle_only() {
        let state = sample_state3();
        let jac = from_deprit(&state).unwrap();
        let c_hat = angular_momenta(&jac).total.normalized();
        let beta = 1.4;
        let rotated = to_deprit(&jac.rotated(|v| v.rotated_about(c_hat, beta)).unwrap()).unwrap();
        let (a, b) = (state.flatten(), rotated.flatten());
        for i in 0..12 {
            if i == 10 {
                assert!(
                    angle_diff(b[i], a[i] + beta).abs() < 1e-10,
                    "φ1 must shift by β"
                );
            } else if i >= 6 {
                assert!(angle_diff(a[i], b[i]).abs() < 1e-10, "angle {i} moved");
            } else {
                assert!((a[i] - b[i]).abs() < 1e-10, "action {i} moved");
            }
        }
    }

    #[test]
    fn coplanar_input_errors_cleanly() {
        // both ellipses in the xy-plane, C vertical: coplanar and vertical
        let mut blocks = sample_state3().blocks().to_vec();
        blocks[0].G = 1.0;
        blocks[1].G = 1.0;
        let state = DepritState::new(blocks, vec![], 2.0, 0.3, 1.0, 0.4, MASSES3.to_vec());
        // Φ1 = G1 + G2 exactly: triangle equality = coplanar
        match state {
            Ok(s) => match from_deprit(&s) {
                Err(Error::CoplanarOrbits { .. }) | Err(Error::TriangleViolation { .. }) => {}
                other => panic!("expected coplanar rejection, got {other:?}"),
            },
            Err(Error::TriangleViolation { .. }) => {}
            Err(e) => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn vertical_input_errors_cleanly() {
        let state = DepritState::new(
            sample_state3().blocks().to_vec(),
            vec![],
            1.9,
            1.3,
            1.9, // Φ2 = Φ1: vertical
            2.6,
            MASSES3.to_vec(),
        )
        .unwrap();
        assert!(matches!(
            from_deprit(&state),
            Err(Error::VerticalC { .. })
        ));
    }

    #[test]
    fn vertical_forward_errors_cleanly() {
        // two bound prograde ellipses in the xy plane: C vertical and the
        // orbit planes coplanar — rejected, never NaN
        let (mu, mgrav) = crate::jacobi::mass_parameters(&MASSES3);
        let mk = |i: usize, r: f64| {
            let v_circ = (mgrav[i] / r).sqrt();
            JacobiPair {
                momentum: Vec3::new(0.0, 0.9 * mu[i] * v_circ, 0.0),
                position: Vec3::new(r, 0.0, 0.0),
            }
        };
        let jac = JacobiState::new(vec![mk(0, 1.3), mk(1, 3.0)], MASSES3.to_vec()).unwrap();
        match to_deprit(&jac) {
            Err(Error::VerticalC { .. }) | Err(Error::CoplanarOrbits { .. }) => {}
            other => panic!("expected a degeneracy error, got {other:?}"),
        }
    }

    #[test]
    fn four_body_roundtrip() {
        let masses = vec![1.0, 0.5, 0.3, 0.2];
        let state = DepritState::new(
            vec![
                DepritBlock {
                    L: 1.1,
                    l: 0.5,
                    G: 0.9,
                    g_bar: 1.2,
                },
                DepritBlock {
                    L: 1.3,
                    l: 2.8,
                    G: 1.1,
                    g_bar: 3.9,
                },
                DepritBlock {
                    L: 1.0,
                    l: 5.1,
                    G: 0.85,
                    g_bar: 0.3,
                },
            ],
            vec![ChainPair {
                norm: 1.6,
                angle: 2.2,
            }],
            2.0,
            0.9,
            0.7,
            4.4,
            masses,
        )
        .unwrap();
        let jac = from_deprit_n(&state).unwrap();
        let back = to_deprit_n(&jac).unwrap();
        let (a, b) = (state.flatten(), back.flatten());
        for i in 0..a.len() {
            let d = if i >= 9 {
                angle_diff(a[i], b[i]).abs()
            } else {
                (a[i] - b[i]).abs()
            };
            assert!(d < 1e-8, "coordinate {i}: {} vs {}", a[i], b[i]);
        }
        // three-body path is the same code
        assert_eq!(state.n_ellipses(), 3);
    }

    #[test]
    fn two_bodies_are_rejected() {
        let jac = JacobiState::new(
            vec![JacobiPair {
                momentum: Vec3::new(0.0, 1.0, 0.1),
                position: Vec3::new(1.0, 0.0, 0.0),
            }],
            vec![1.0, 0.5],
        )
        .unwrap();
        assert!(matches!(to_deprit_n(&jac), Err(Error::Unsupported(_))));
    }

    #[test]
    fn angles_are_wrapped_on_construction() {
        let s = DepritState::new(
            vec![
                DepritBlock {
                    L: 1.2,
                    l: -0.7,
                    G: 1.05,
                    g_bar: TAU + 0.3,
                },
                DepritBlock {
                    L: 1.5,
                    l: 9.0,
                    G: 1.2,
                    g_bar: 5.3,
                },
            ],
            vec![],
            1.9,
            -1.0,
            0.8,
            2.6,
            MASSES3.to_vec(),
        )
        .unwrap();
        for v in s.flatten().iter().skip(6) {
            assert!((0.0..TAU).contains(v));
        }
    }
}
