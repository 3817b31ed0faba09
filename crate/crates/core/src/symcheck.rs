//! The verification engine: numerical differentiation, symplectic-chart
//! certification, Poisson-bracket matrices, cross-section nondegeneracy and
//! the D-factor measurement.
//!
//! A chart `y = φ(x)` from canonical coordinates is certified by computing
//! `J = ∂y/∂x` and the bracket matrix `B = J Ω Jᵀ` (so `B_ij = {y_i, y_j}`),
//! then comparing `B`, reordered by the chart's declared pairing, against
//! the canonical pattern. Two differentiation schemes are available:
//! central finite differences and exact forward-mode dual numbers (used
//! automatically when the chart ships a dual path).
//!
//! The default difference step `h_i = ε^{1/3} max(1, |x_i|)` is optimal for
//! curvature of order one. The deeply nested Deprit maps carry third
//! derivatives up to ~1e6 at moderate margins, which pushes the plain
//! central-difference floor to ~1e-5 there; [`REFINED_FD_SCALE`] trades
//! truncation against roundoff for those charts, and the dual scheme is
//! exact regardless.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::jacobi::JacobiState;
use crate::phasespace::{angle_diff, canonical_matrix, Chart, Vec3};

/// Default central-difference step scale `ε^{1/3}`.
pub const DEFAULT_FD_SCALE: f64 = 6.055454452393343e-6;
/// Smaller step for strongly nonlinear charts, `8 ε^{1/2}` (~1.2e-7); keeps
/// the truncation error of the Deprit charts near 1e-8 at the cost of more
/// roundoff on mildly nonlinear ones.
pub const REFINED_FD_SCALE: f64 = 1.1920928955078125e-7;

/// Differentiation scheme used by a certification run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    /// Central finite differences with per-coordinate step
    /// `h_i = scale · max(1, |x_i|)`.
    CentralDiff { step_scale: f64 },
    /// Exact forward-mode dual numbers.
    DualNumber,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::CentralDiff { step_scale } => write!(f, "central-diff(h={step_scale:.3e})"),
            Scheme::DualNumber => write!(f, "dual-number"),
        }
    }
}

/// Jacobian of the chart's forward map by central finite differences with
/// the spec default step `h_i = ε^{1/3} max(1, |x_i|)`. Periodic target
/// coordinates are differenced mod 2π.
pub fn jacobian(chart: &Chart, x: &[f64]) -> Result<DMatrix<f64>> {
    jacobian_with_step(chart, x, DEFAULT_FD_SCALE)
}

/// Central-difference Jacobian with an explicit step scale.
pub fn jacobian_with_step(chart: &Chart, x: &[f64], step_scale: f64) -> Result<DMatrix<f64>> {
    let dim = chart.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    if !chart.in_domain(x) {
        return Err(Error::DomainViolation {
            context: "jacobian probe center",
        });
    }
    let mut jac = DMatrix::zeros(dim, dim);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for i in 0..dim {
        let h = step_scale * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        let span = xp[i] - xm[i]; // the representable step, not 2h
        let fp = chart.forward(&xp)?;
        let fm = chart.forward(&xm)?;
        for r in 0..dim {
            let d = if chart.is_angular(r) {
                angle_diff(fp[r], fm[r])
            } else {
                fp[r] - fm[r]
            };
            jac[(r, i)] = d / span;
        }
        xp[i] = x[i];
        xm[i] = x[i];
    }
    Ok(jac)
}

/// Exact Jacobian via the chart's dual-number forward path.
pub fn jacobian_dual(chart: &Chart, x: &[f64]) -> Result<DMatrix<f64>> {
    let dim = chart.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    let mut jac = DMatrix::zeros(dim, dim);
    let mut seed: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
    for i in 0..dim {
        seed[i].d = 1.0;
        let col = chart.forward_dual(&seed)?;
        for r in 0..dim {
            jac[(r, i)] = col[r].d;
        }
        seed[i].d = 0.0;
    }
    Ok(jac)
}

fn jacobian_by(chart: &Chart, x: &[f64], scheme: Scheme) -> Result<DMatrix<f64>> {
    match scheme {
        Scheme::CentralDiff { step_scale } => jacobian_with_step(chart, x, step_scale),
        Scheme::DualNumber => jacobian_dual(chart, x),
    }
}

/// Result of a symplectic certification at one point.
#[derive(Clone, Debug)]
pub struct SymplecticReport {
    /// The probed source point.
    pub point: Vec<f64>,
    /// `‖B − Ω‖` (max absolute entry) after reordering by the pairing.
    pub max_defect: f64,
    /// Bracket matrix `{y_i, y_j}` in pairing order (actions first).
    pub bracket_matrix: DMatrix<f64>,
    /// Whether `max_defect < tol`.
    pub pass: bool,
    pub tol: f64,
    pub scheme: Scheme,
    /// Per-coordinate difference steps (empty for the dual scheme).
    pub step_sizes: Vec<f64>,
}

impl SymplecticReport {
    /// Machine-readable summary line.
    pub fn machine_line(&self, seed: u64) -> String {
        format!(
            "defect={:e} pass={} seed={}",
            self.max_defect,
            u8::from(self.pass),
            seed
        )
    }

    /// The bracket `{Φ₂, φ₂}` of the chart's declared vertical pair (the
    /// last pairing entry).
    pub fn vertical_pair_bracket(&self) -> f64 {
        let n = self.bracket_matrix.nrows() / 2;
        self.bracket_matrix[(n - 1, 2 * n - 1)]
    }
}

/// Certify that a chart is symplectic at `x`: the bracket matrix of the
/// target coordinates must match the canonical pattern of the declared
/// pairing to within `tol`. Uses the dual-number scheme when the chart
/// provides it, central differences otherwise.
pub fn certify_symplectic(chart: &Chart, x: &[f64], tol: f64) -> Result<SymplecticReport> {
    let scheme = if chart.has_dual_forward() {
        Scheme::DualNumber
    } else {
        Scheme::CentralDiff {
            step_scale: DEFAULT_FD_SCALE,
        }
    };
    certify_with_scheme(chart, x, tol, scheme)
}

/// Certification with an explicit differentiation scheme.
pub fn certify_with_scheme(
    chart: &Chart,
    x: &[f64],
    tol: f64,
    scheme: Scheme,
) -> Result<SymplecticReport> {
    let dim = chart.dim();
    let jac = jacobian_by(chart, x, scheme)?;
    let omega = canonical_matrix(dim);
    let bracket_raw = &jac * &omega * jac.transpose();

    // reorder to pairing order: actions first, then their angles
    let mut perm = Vec::with_capacity(dim);
    for &(a, _) in chart.pairing() {
        perm.push(a);
    }
    for &(_, g) in chart.pairing() {
        perm.push(g);
    }
    let bracket =
        DMatrix::from_fn(dim, dim, |r, c| bracket_raw[(perm[r], perm[c])]);
    let max_defect = (&bracket - &omega).amax();
    let step_sizes = match scheme {
        Scheme::CentralDiff { step_scale } => {
            x.iter().map(|v| step_scale * v.abs().max(1.0)).collect()
        }
        Scheme::DualNumber => Vec::new(),
    };
    Ok(SymplecticReport {
        point: x.to_vec(),
        max_defect,
        bracket_matrix: bracket,
        pass: max_defect < tol,
        tol,
        scheme,
        step_sizes,
    })
}

/// Poisson bracket `{f, g}` at `x` under the crate conventions, via central
/// finite differences of the two functions.
pub fn bracket<F, G>(f: F, g: G, x: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<f64>,
{
    let dim = x.len();
    if dim % 2 != 0 {
        return Err(Error::Unsupported(
            "bracket needs an even-dimensional point".into(),
        ));
    }
    let n = dim / 2;
    let grad = |func: &dyn Fn(&[f64]) -> Result<f64>| -> Result<Vec<f64>> {
        let mut out = vec![0.0; dim];
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for i in 0..dim {
            let h = DEFAULT_FD_SCALE * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            xm[i] = x[i] - h;
            out[i] = (func(&xp)? - func(&xm)?) / (xp[i] - xm[i]);
            xp[i] = x[i];
            xm[i] = x[i];
        }
        Ok(out)
    };
    let df = grad(&f)?;
    let dg = grad(&g)?;
    let mut sum = 0.0;
    for i in 0..n {
        sum += df[i] * dg[n + i] - df[n + i] * dg[i];
    }
    Ok(sum)
}

/// `{Φ₂, φ₂}` of the chart's declared vertical pair at `x`. Under the
/// invariant-form decomposition this equals `1/D`; a symplectic chart
/// returns 1.
pub fn measure_d_factor(chart: &Chart, x: &[f64]) -> Result<f64> {
    // The bracket matrix is computed whether or not certification passes,
    // so deliberately rescaled control charts can be measured too.
    let report = certify_symplectic(chart, x, f64::INFINITY)?;
    Ok(report.vertical_pair_bracket())
}

/// Report of a cross-section nondegeneracy check.
#[derive(Clone, Debug)]
pub struct CrossSectionReport {
    /// Dimension of the tangent space of the constrained submanifold.
    pub tangent_dim: usize,
    /// Smallest singular value of the restricted two-form, per point.
    pub min_singular_values: Vec<f64>,
    pub pass: bool,
    pub tol: f64,
}

/// Smallest singular value (and tangent dimension) of the canonical
/// two-form restricted to the zero set of the given constraints at `x`.
/// The tangent basis is built numerically from the constraint gradients.
pub fn restricted_form_min_sv(
    x: &[f64],
    constraints: &[&dyn Fn(&[f64]) -> f64],
) -> Result<(f64, usize)> {
    let dim = x.len();
    let m = constraints.len();
    // constraint gradients by central differences
    let mut grads = DMatrix::zeros(m, dim);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for i in 0..dim {
        let h = DEFAULT_FD_SCALE * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        for (r, c) in constraints.iter().enumerate() {
            grads[(r, i)] = (c(&xp) - c(&xm)) / (xp[i] - xm[i]);
        }
        xp[i] = x[i];
        xm[i] = x[i];
    }
    // orthonormalize the gradient rows
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    for r in 0..m {
        let mut v = grads.row(r).transpose();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let norm = v.norm();
        if norm < 1e-12 {
            return Err(Error::Unsupported(
                "constraint gradients are linearly dependent".into(),
            ));
        }
        basis.push(v / norm);
    }
    // projector onto the tangent space, eigendecomposed for a basis
    let mut projector = DMatrix::identity(dim, dim);
    for b in &basis {
        projector -= b * b.transpose();
    }
    let eig = SymmetricEigen::new(projector);
    let mut tangent_cols: Vec<DVector<f64>> = Vec::new();
    for (idx, lambda) in eig.eigenvalues.iter().enumerate() {
        if *lambda > 0.5 {
            tangent_cols.push(eig.eigenvectors.column(idx).into_owned());
        }
    }
    let t = tangent_cols.len();
    let mut tangent = DMatrix::zeros(dim, t);
    for (c, col) in tangent_cols.iter().enumerate() {
        tangent.set_column(c, col);
    }
    let omega = canonical_matrix(dim);
    let restricted = tangent.transpose() * &omega * &tangent;
    let svals = restricted.svd(false, false).singular_values;
    let min_sv = svals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((min_sv, t))
}

/// Total angular momentum of a flat reduced Jacobi vector.
fn total_angular_momentum_flat(x: &[f64]) -> Vec3 {
    let k = x.len() / 6;
    let mut total = Vec3::zero();
    for i in 0..k {
        let p = Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
        let q = Vec3::new(x[3 * (k + i)], x[3 * (k + i) + 1], x[3 * (k + i) + 2]);
        total = total + q.cross(p);
    }
    total
}

/// Verify that the submanifold of Jacobi states with the direction of the
/// total angular momentum fixed (to the direction shared by `points`)
/// carries a nondegenerate restricted two-form: at every point the smallest
/// singular value must exceed `tol` on the full `6(N−1) − 2`-dimensional
/// tangent space. This is the SO(3) symplectic cross-section.
pub fn check_cross_section(points: &[JacobiState], tol: f64) -> Result<CrossSectionReport> {
    let first = points.first().ok_or_else(|| {
        Error::Unsupported("cross-section check needs at least one point".into())
    })?;
    let c0 = crate::deprit::angular_momenta(first).total;
    if c0.norm() == 0.0 {
        return Err(Error::ZeroAngularMomentum { level: 0 });
    }
    let direction = c0.normalized();
    // orthonormal complement of the fixed direction
    let seed = if direction.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let u1 = (seed - direction.scale(seed.dot(direction))).normalized();
    let u2 = direction.cross(u1);

    let mut min_singular_values = Vec::with_capacity(points.len());
    let mut tangent_dim = 0;
    for (idx, state) in points.iter().enumerate() {
        let c = crate::deprit::angular_momenta(state).total;
        if c.norm() == 0.0 {
            return Err(Error::ZeroAngularMomentum { level: 0 });
        }
        if c.normalized().angle_to(direction) > 1e-8 {
            return Err(Error::InvalidState(format!(
                "point {idx} does not share the common angular-momentum direction"
            )));
        }
        let x = state.flatten();
        let f1 = move |v: &[f64]| total_angular_momentum_flat(v).dot(u1);
        let f2 = move |v: &[f64]| total_angular_momentum_flat(v).dot(u2);
        let (min_sv, t) = restricted_form_min_sv(&x, &[&f1, &f2])?;
        tangent_dim = t;
        min_singular_values.push(min_sv);
    }
    let pass = min_singular_values.iter().all(|s| *s > tol);
    Ok(CrossSectionReport {
        tangent_dim,
        min_singular_values,
        pass,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kepler::spatial_delaunay_chart;
    use crate::phasespace::standard_pairing;

    fn scaling_chart(factor: f64) -> Chart {
        Chart::new(
            "scaled",
            6,
            standard_pairing(6),
            &[],
            move |x| Ok(x.iter().map(|v| factor * v).collect()),
            move |y| Ok(y.iter().map(|v| v / factor).collect()),
            |_| true,
        )
    }

    #[test]
    fn identity_chart_has_zero_defect_and_identity_jacobian() {
        let chart = Chart::identity(6);
        let x = [0.3, -0.2, 0.9, 1.5, -0.7, 0.1];
        let jac = jacobian(&chart, &x).unwrap();
        assert!((jac - DMatrix::<f64>::identity(6, 6)).amax() < 1e-12);
        let report = certify_symplectic(&chart, &x, 1e-6).unwrap();
        assert_eq!(report.scheme, Scheme::DualNumber);
        assert!(report.pass);
        assert!(report.max_defect < 1e-14);
    }

    #[test]
    fn linear_map_jacobian_is_exact() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        // power-of-two scaling differences are representable: exact
        let jac2 = jacobian(&scaling_chart(2.0), &x).unwrap();
        assert!((jac2 - 2.0 * DMatrix::<f64>::identity(6, 6)).amax() < 1e-12);
        // general coefficients sit at the roundoff floor ε|f|/h
        let jac3 = jacobian(&scaling_chart(3.0), &x).unwrap();
        assert!((jac3 - 3.0 * DMatrix::<f64>::identity(6, 6)).amax() < 1e-9);
    }

    #[test]
    fn uniform_scaling_fails_with_defect_three() {
        let chart = scaling_chart(2.0);
        let x = [0.5, -0.3, 0.8, 1.0, 0.2, -0.6];
        let report = certify_symplectic(&chart, &x, 1e-6).unwrap();
        assert!(!report.pass);
        assert!((report.max_defect - 3.0).abs() < 1e-9);
    }

    #[test]
    fn delaunay_jacobian_row_matches_analytic_derivative() {
        let (mu, mgrav) = (1.0, 1.0);
        let chart = spatial_delaunay_chart(mu, mgrav);
        // moderately eccentric, inclined probe point
        let el = crate::kepler::OrbitalElements {
            a: 1.4,
            e: 0.3,
            i: 0.8,
            arg_peri: 1.0,
            node: 2.0,
            mean_anom: 0.9,
            flags: Default::default(),
        };
        let (q, p) = crate::kepler::elements_to_cartesian(&el, mu, mgrav).unwrap();
        let x = vec![p.x, p.y, p.z, q.x, q.y, q.z];
        let jac = jacobian(&chart, &x).unwrap();
        // L = mu sqrt(mgrav a(P,Q)):
        // ∂L/∂P = mu sqrt(mgrav) ∂√a/∂a · ∂a/∂E · ∂E/∂P
        let r = q.norm();
        let energy = p.norm_squared() / (2.0 * mu) - mu * mgrav / r;
        let a = -mu * mgrav / (2.0 * energy);
        let dl_dp = |pi: f64| {
            let de_dp = pi / mu;
            let da_de = mu * mgrav / (2.0 * energy * energy);
            mu * mgrav.sqrt() / (2.0 * a.sqrt()) * da_de * de_dp
        };
        for (col, pi) in [(0, p.x), (1, p.y), (2, p.z)] {
            assert!(
                (jac[(0, col)] - dl_dp(pi)).abs() < 1e-7,
                "∂L/∂P_{col}: {} vs {}",
                jac[(0, col)],
                dl_dp(pi)
            );
        }
    }

    #[test]
    fn bracket_is_antisymmetric_and_zero_on_diagonal() {
        let f = |x: &[f64]| Ok(x[0] * x[0] + x[1] * x[2]);
        let g = |x: &[f64]| Ok(x[3] - x[0] * x[1]);
        let x = [0.4, -0.3, 0.9, 0.2];
        let fg = bracket(f, g, &x).unwrap();
        let gf = bracket(g, f, &x).unwrap();
        assert!((fg + gf).abs() < 1e-9);
        let ff = bracket(f, f, &x).unwrap();
        assert!(ff.abs() < 1e-12);
    }

    #[test]
    fn canonical_coordinate_brackets() {
        // {P_0, Q_0} = +1 with the fixed bracket convention
        let p0 = |x: &[f64]| Ok(x[0]);
        let q0 = |x: &[f64]| Ok(x[2]);
        let x = [0.7, -0.2, 0.4, 1.1];
        assert!((bracket(p0, q0, &x).unwrap() - 1.0).abs() < 1e-10);
        assert!((bracket(q0, p0, &x).unwrap() + 1.0).abs() < 1e-10);
    }

    #[test]
    fn fixing_two_positions_gives_rank_deficient_form() {
        // constraints dQ1x, dQ1y: their Hamiltonian fields stay tangent,
        // so the restricted form degenerates (rank 8 of 10 for N=3)
        let x: Vec<f64> = (0..12).map(|i| 0.3 + 0.1 * i as f64).collect();
        let c1 = |v: &[f64]| v[6];
        let c2 = |v: &[f64]| v[7];
        let (min_sv, dim) = restricted_form_min_sv(&x, &[&c1, &c2]).unwrap();
        assert_eq!(dim, 10);
        assert!(min_sv < 1e-8, "expected degenerate form, got σ_min = {min_sv}");
    }
}
