//! Two-body machinery: Kepler equation, Cartesian ↔ orbital elements ↔
//! Delaunay variables, Keplerian energy and mean motion.
//!
//! A fictitious body with mass factor `mu` and gravitational parameter
//! `mgrav` moves under `H = |P|²/(2 mu) − mu·mgrav/|Q|`; velocities obey the
//! textbook formulas with GM = `mgrav` and `P = mu·v`. Delaunay actions:
//! `L = mu √(mgrav·a)`, `G = |Q×P|`, `H = (Q×P)_z`.
//!
//! The variables are well-defined only away from circular, horizontal and
//! rectilinear orbits; explicit thresholds ([`CIRCULAR_TOL`],
//! [`HORIZONTAL_TOL`], [`RECTILINEAR_TOL`]) decide the flags, and undefined
//! angles are returned as 0 with the corresponding flag raised.

use std::f64::consts::PI;

use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::phasespace::{angle_in_plane, read_vec3s, wrap_angle, Chart, Vec3};

/// Eccentricity below which an orbit is treated as circular.
pub const CIRCULAR_TOL: f64 = 1e-9;
/// `sin i` below which an orbit is treated as horizontal.
pub const HORIZONTAL_TOL: f64 = 1e-9;
/// `|Q×P| / (mu √(mgrav a))` below which an orbit is treated as rectilinear.
pub const RECTILINEAR_TOL: f64 = 1e-12;

/// Residual target for the Kepler solver.
const KEPLER_RESIDUAL: f64 = 1e-14;

/// Degeneracy flags of an osculating ellipse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OrbitFlags {
    pub circular: bool,
    pub horizontal: bool,
    pub rectilinear: bool,
}

impl OrbitFlags {
    pub fn any(self) -> bool {
        self.circular || self.horizontal || self.rectilinear
    }
}

/// Classical orbital elements of an osculating Keplerian ellipse.
///
/// `arg_peri` is meaningful only when not circular, `node` only when not
/// horizontal; undefined angles are 0 with the flag raised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitalElements {
    /// Semi-major axis, > 0.
    pub a: f64,
    /// Eccentricity in [0, 1).
    pub e: f64,
    /// Inclination in [0, π].
    pub i: f64,
    /// Argument of pericenter ω in [0, 2π).
    pub arg_peri: f64,
    /// Longitude of the ascending node Ω in [0, 2π).
    pub node: f64,
    /// Mean anomaly in [0, 2π).
    pub mean_anom: f64,
    pub flags: OrbitFlags,
}

/// Spatial Delaunay variables `(L, l, G, g, H, h)`.
#[allow(non_snake_case)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelaunayElements {
    /// Circular angular momentum `L = mu √(mgrav a)`.
    pub L: f64,
    /// Mean anomaly.
    pub l: f64,
    /// Angular momentum `G = L √(1−e²)`.
    pub G: f64,
    /// Argument of pericenter.
    pub g: f64,
    /// Vertical component of the angular momentum `H = G cos i`.
    pub H: f64,
    /// Longitude of the ascending node.
    pub h: f64,
    pub flags: OrbitFlags,
}

impl DelaunayElements {
    /// Validates `L > 0`, `0 < G ≤ L`, `|H| ≤ G` (to roundoff slack) and
    /// derives the degeneracy flags. Angles are wrapped to `[0, 2π)`.
    #[allow(non_snake_case)]
    pub fn new(L: f64, l: f64, G: f64, g: f64, H: f64, h: f64) -> Result<Self> {
        for (v, what) in [(L, "L"), (l, "l"), (G, "G"), (g, "g"), (H, "H"), (h, "h")] {
            if !v.is_finite() {
                let _ = what;
                return Err(Error::NonFinite("Delaunay element"));
            }
        }
        if L <= 0.0 {
            return Err(Error::InvalidElements(format!("L = {L} must be > 0")));
        }
        if G <= 0.0 {
            return Err(Error::InvalidElements(format!("G = {G} must be > 0")));
        }
        let slack = 1e-12;
        if G > L * (1.0 + slack) {
            return Err(Error::InvalidElements(format!("G = {G} exceeds L = {L}")));
        }
        if H.abs() > G * (1.0 + slack) {
            return Err(Error::InvalidElements(format!("|H| = {} exceeds G = {G}", H.abs())));
        }
        let G = G.min(L);
        let H = H.clamp(-G, G);
        let e = (1.0 - (G / L).powi(2)).max(0.0).sqrt();
        let sin_i = (1.0 - (H / G).powi(2)).max(0.0).sqrt();
        let flags = OrbitFlags {
            circular: e < CIRCULAR_TOL,
            horizontal: sin_i < HORIZONTAL_TOL,
            rectilinear: false,
        };
        Ok(DelaunayElements {
            L,
            l: wrap_angle(l),
            G,
            g: wrap_angle(g),
            H,
            h: wrap_angle(h),
            flags,
        })
    }
}

/// Solve Kepler's equation `E − e sin E = M (mod 2π)` for the eccentric
/// anomaly, `0 ≤ e < 1`. Newton from Danby's starter with a bisection
/// fallback; the result is wrapped to `[0, 2π)` and its residual is below
/// 1e−13.
pub fn solve_kepler(mean_anom: f64, e: f64) -> Result<f64> {
    if !mean_anom.is_finite() || !e.is_finite() {
        return Err(Error::NonFinite("solve_kepler input"));
    }
    if !(0.0..1.0).contains(&e) {
        return Err(Error::InvalidEccentricity { e });
    }
    let m = wrap_angle(mean_anom);
    let mut ecc_anom = m + 0.85 * e * m.sin().signum();
    for _ in 0..50 {
        let f = ecc_anom - e * ecc_anom.sin() - m;
        if f.abs() < KEPLER_RESIDUAL {
            return Ok(wrap_angle(ecc_anom));
        }
        ecc_anom -= f / (1.0 - e * ecc_anom.cos());
    }
    // Bisection fallback on the bracketing interval [M−e, M+e]; the residual
    // is monotone in E with slope ≥ 1−e > 0.
    let (mut lo, mut hi) = (m - e, m + e);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = mid - e * mid.sin() - m;
        if f.abs() < KEPLER_RESIDUAL || hi - lo < f64::EPSILON * hi.abs().max(1.0) {
            return Ok(wrap_angle(mid));
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(wrap_angle(0.5 * (lo + hi)))
}

/// Keplerian energy of the circular-angular-momentum action:
/// `K = −mu³ mgrav² / (2 L²)`.
#[allow(non_snake_case)]
pub fn keplerian_energy(L: f64, mu: f64, mgrav: f64) -> Result<f64> {
    check_l_mu(L, mu, mgrav)?;
    Ok(-mu.powi(3) * mgrav.powi(2) / (2.0 * L * L))
}

/// Mean motion `n = ∂K/∂L = mu³ mgrav² / L³`, consistent with
/// `n = √(mgrav/a³)`.
#[allow(non_snake_case)]
pub fn mean_motion(L: f64, mu: f64, mgrav: f64) -> Result<f64> {
    check_l_mu(L, mu, mgrav)?;
    Ok(mu.powi(3) * mgrav.powi(2) / (L * L * L))
}

#[allow(non_snake_case)]
fn check_l_mu(L: f64, mu: f64, mgrav: f64) -> Result<()> {
    if !(L.is_finite() && mu.is_finite() && mgrav.is_finite()) {
        return Err(Error::NonFinite("action/mass parameters"));
    }
    if L <= 0.0 || mu <= 0.0 || mgrav <= 0.0 {
        return Err(Error::InvalidElements(format!(
            "L = {L}, mu = {mu}, mgrav = {mgrav} must all be > 0"
        )));
    }
    Ok(())
}

/// Intrinsic geometry of an osculating ellipse: shape, phase and the frame
/// vectors (pericenter direction, orbit normal). Shared by the Delaunay
/// charts and the Deprit construction; generic so the dual-number path can
/// differentiate through it.
pub(crate) struct OrbitGeometry<T: Scalar> {
    pub a: T,
    pub e: T,
    pub mean_anom: T,
    /// Pericenter direction; falls back to the node line (or x̂) when
    /// circular, matching the angles-are-zero convention.
    pub e_hat: Vec3<T>,
    /// Orbit plane normal `(Q×P)/|Q×P|`.
    pub c_hat: Vec3<T>,
    /// `L = mu √(mgrav a)`.
    pub l_action: T,
    /// `G = |Q×P|`.
    pub g_action: T,
    pub flags: OrbitFlags,
}

#[allow(non_snake_case)]
pub(crate) fn orbit_geometry<T: Scalar>(
    q: Vec3<T>,
    p: Vec3<T>,
    mu: f64,
    mgrav: f64,
    ellipse: usize,
) -> Result<OrbitGeometry<T>> {
    let muT = T::from_f64(mu);
    let mgravT = T::from_f64(mgrav);
    let one = T::from_f64(1.0);
    let r = q.norm();
    if r.value() <= 0.0 {
        return Err(Error::DomainViolation {
            context: "orbit geometry at zero radius",
        });
    }
    let energy = p.norm_squared() / (T::from_f64(2.0) * muT) - muT * mgravT / r;
    if energy.value() >= 0.0 {
        return Err(Error::NonElliptic {
            energy: energy.value(),
        });
    }
    let a = -(muT * mgravT) / (T::from_f64(2.0) * energy);
    let c = q.cross(p);
    let G = c.norm();
    let L = muT * (mgravT * a).sqrt();
    if (G / L).value() < RECTILINEAR_TOL {
        return Err(Error::Rectilinear {
            ellipse,
            ratio: (G / L).value(),
        });
    }
    let c_hat = c.scale(one / G);
    let q_hat = q.scale(one / r);
    let e_vec = p.cross(c).scale(one / (muT * muT * mgravT)) - q_hat;
    let e = e_vec.norm();
    let sin_i = (c_hat.x * c_hat.x + c_hat.y * c_hat.y).sqrt();
    let flags = OrbitFlags {
        circular: e.value() < CIRCULAR_TOL,
        horizontal: sin_i.value() < HORIZONTAL_TOL,
        rectilinear: false,
    };
    let x_hat = Vec3::new(one, T::from_f64(0.0), T::from_f64(0.0));
    let z_hat = Vec3::new(T::from_f64(0.0), T::from_f64(0.0), one);
    let e_hat = if flags.circular {
        if flags.horizontal {
            x_hat
        } else {
            z_hat.cross(c_hat).normalized()
        }
    } else {
        e_vec.scale(one / e)
    };
    let mean_anom = if flags.circular {
        // e → 0: mean anomaly degenerates to the phase angle from e_hat.
        angle_in_plane(e_hat, q_hat, c_hat)
    } else {
        let e_cos = one - r / a;
        let n = (mgravT / (a * a * a)).sqrt();
        let e_sin = q.dot(p) / (muT * n * a * a);
        let ecc_anom = e_sin.atan2(e_cos);
        wrap_angle(ecc_anom - e_sin)
    };
    Ok(OrbitGeometry {
        a,
        e,
        mean_anom,
        e_hat,
        c_hat,
        l_action: L,
        g_action: G,
        flags,
    })
}

/// Place an ellipse with the given frame vectors back into Cartesian
/// coordinates. `e_hat` points to the pericenter, `c_hat` is the orbit
/// normal. Returns `(position, momentum)`.
pub(crate) fn assemble_ellipse(
    a: f64,
    e: f64,
    mean_anom: f64,
    e_hat: Vec3,
    c_hat: Vec3,
    mu: f64,
    mgrav: f64,
) -> Result<(Vec3, Vec3)> {
    let ecc_anom = solve_kepler(mean_anom, e)?;
    let (sin_e, cos_e) = ecc_anom.sin_cos();
    let beta = (1.0 - e * e).sqrt();
    let in_plane = c_hat.cross(e_hat);
    let q = e_hat.scale(a * (cos_e - e)) + in_plane.scale(a * beta * sin_e);
    let n = (mgrav / (a * a * a)).sqrt();
    let fac = mu * n * a / (1.0 - e * cos_e);
    let p = e_hat.scale(-fac * sin_e) + in_plane.scale(fac * beta * cos_e);
    Ok((q, p))
}

/// Orbital elements of the osculating ellipse of `H = |P|²/(2mu) − mu·mgrav/|Q|`.
pub fn cartesian_to_elements(q: Vec3, p: Vec3, mu: f64, mgrav: f64) -> Result<OrbitalElements> {
    check_mass_params(mu, mgrav)?;
    if !q.is_finite() || !p.is_finite() {
        return Err(Error::NonFinite("cartesian state"));
    }
    let geo = orbit_geometry::<f64>(q, p, mu, mgrav, 0)?;
    let c_hat = geo.c_hat;
    let sin_i = c_hat.x.hypot(c_hat.y);
    let i = sin_i.atan2(c_hat.z);
    let z_hat = Vec3::new(0.0, 0.0, 1.0);
    let (node, n_hat) = if geo.flags.horizontal {
        (0.0, Vec3::new(1.0, 0.0, 0.0))
    } else {
        (
            wrap_angle(c_hat.x.atan2(-c_hat.y)),
            z_hat.cross(c_hat).normalized(),
        )
    };
    let arg_peri = if geo.flags.circular {
        0.0
    } else {
        angle_in_plane(n_hat, geo.e_hat, c_hat)
    };
    Ok(OrbitalElements {
        a: geo.a,
        e: geo.e,
        i,
        arg_peri,
        node,
        mean_anom: geo.mean_anom,
        flags: geo.flags,
    })
}

/// Exact inverse of [`cartesian_to_elements`] on nondegenerate elements.
/// Returns `(position, momentum)`.
pub fn elements_to_cartesian(el: &OrbitalElements, mu: f64, mgrav: f64) -> Result<(Vec3, Vec3)> {
    check_mass_params(mu, mgrav)?;
    for v in [el.a, el.e, el.i, el.arg_peri, el.node, el.mean_anom] {
        if !v.is_finite() {
            return Err(Error::NonFinite("orbital element"));
        }
    }
    if el.a <= 0.0 {
        return Err(Error::InvalidElements(format!("a = {} must be > 0", el.a)));
    }
    if !(0.0..1.0).contains(&el.e) {
        return Err(Error::InvalidEccentricity { e: el.e });
    }
    if !(0.0..=PI).contains(&el.i) {
        return Err(Error::InvalidElements(format!(
            "inclination {} outside [0, π]",
            el.i
        )));
    }
    let (sin_i, cos_i) = el.i.sin_cos();
    let (sin_o, cos_o) = el.node.sin_cos();
    let c_hat = Vec3::new(sin_i * sin_o, -sin_i * cos_o, cos_i);
    let n_hat = Vec3::new(cos_o, sin_o, 0.0);
    let e_hat = n_hat.rotated_about(c_hat, el.arg_peri);
    assemble_ellipse(el.a, el.e, el.mean_anom, e_hat, c_hat, mu, mgrav)
}

/// `(L, l, G, g, H, h)` from orbital elements.
#[allow(non_snake_case)]
pub fn elements_to_delaunay(el: &OrbitalElements, mu: f64, mgrav: f64) -> Result<DelaunayElements> {
    check_mass_params(mu, mgrav)?;
    let L = mu * (mgrav * el.a).sqrt();
    let G = L * (1.0 - el.e * el.e).sqrt();
    let H = G * el.i.cos();
    let mut d = DelaunayElements::new(L, el.mean_anom, G, el.arg_peri, H, el.node)?;
    d.flags = el.flags;
    Ok(d)
}

/// Inverse of [`elements_to_delaunay`]: `a = L²/(mu² mgrav)`,
/// `e = √(1−(G/L)²)`, `i = arccos(H/G)`.
pub fn delaunay_to_elements(d: &DelaunayElements, mu: f64, mgrav: f64) -> Result<OrbitalElements> {
    check_mass_params(mu, mgrav)?;
    let valid = DelaunayElements::new(d.L, d.l, d.G, d.g, d.H, d.h)?;
    let a = valid.L * valid.L / (mu * mu * mgrav);
    let e = (1.0 - (valid.G / valid.L).powi(2)).max(0.0).sqrt();
    let i = (valid.H / valid.G).clamp(-1.0, 1.0).acos();
    Ok(OrbitalElements {
        a,
        e,
        i,
        arg_peri: valid.g,
        node: valid.h,
        mean_anom: valid.l,
        flags: valid.flags,
    })
}

fn check_mass_params(mu: f64, mgrav: f64) -> Result<()> {
    if !(mu.is_finite() && mgrav.is_finite()) {
        return Err(Error::NonFinite("mass parameters"));
    }
    if mu <= 0.0 || mgrav <= 0.0 {
        return Err(Error::InvalidElements(format!(
            "mu = {mu}, mgrav = {mgrav} must be > 0"
        )));
    }
    Ok(())
}

/// Forward map of the spatial Delaunay chart:
/// `(P, Q) → (L, G, H, l, g, h)`, actions first.
#[allow(non_snake_case)]
pub(crate) fn delaunay_forward<T: Scalar>(src: &[T], mu: f64, mgrav: f64) -> Result<Vec<T>> {
    let v = read_vec3s(src);
    let (p, q) = (v[0], v[1]);
    let geo = orbit_geometry(q, p, mu, mgrav, 0)?;
    if geo.flags.any() {
        return Err(Error::DomainViolation {
            context: "Delaunay chart requires a nondegenerate ellipse",
        });
    }
    let c_hat = geo.c_hat;
    let zero = T::from_f64(0.0);
    let one = T::from_f64(1.0);
    let z_hat = Vec3::new(zero, zero, one);
    let n_hat = z_hat.cross(c_hat).normalized();
    let H = q.cross(p).z;
    let g = angle_in_plane(n_hat, geo.e_hat, c_hat);
    let h = wrap_angle(c_hat.x.atan2(-c_hat.y));
    Ok(vec![geo.l_action, geo.g_action, H, geo.mean_anom, g, h])
}

#[allow(non_snake_case)]
fn delaunay_inverse(tgt: &[f64], mu: f64, mgrav: f64) -> Result<Vec<f64>> {
    let d = DelaunayElements::new(tgt[0], tgt[3], tgt[1], tgt[4], tgt[2], tgt[5])?;
    if d.flags.any() {
        return Err(Error::DomainViolation {
            context: "Delaunay chart requires a nondegenerate ellipse",
        });
    }
    let el = delaunay_to_elements(&d, mu, mgrav)?;
    let (q, p) = elements_to_cartesian(&el, mu, mgrav)?;
    Ok(vec![p.x, p.y, p.z, q.x, q.y, q.z])
}

/// The spatial Delaunay chart for one fictitious body:
/// source `(P, Q)` in ℝ⁶, target `(L, G, H, l, g, h)`. The `(H, h)` pair is
/// the vertical pair (declared last).
pub fn spatial_delaunay_chart(mu: f64, mgrav: f64) -> Chart {
    Chart::new(
        "delaunay",
        6,
        vec![(0, 3), (1, 4), (2, 5)],
        &[3, 4, 5],
        move |x| delaunay_forward::<f64>(x, mu, mgrav),
        move |y| delaunay_inverse(y, mu, mgrav),
        move |x| delaunay_forward::<f64>(x, mu, mgrav).is_ok(),
    )
    .with_dual_forward(move |x: &[Dual]| delaunay_forward::<Dual>(x, mu, mgrav))
}

/// Forward map of the planar Delaunay chart:
/// `(Px, Py, Qx, Qy) → (L, G, l, g)` for prograde planar ellipses.
#[allow(non_snake_case)]
pub(crate) fn planar_delaunay_forward<T: Scalar>(src: &[T], mu: f64, mgrav: f64) -> Result<Vec<T>> {
    let muT = T::from_f64(mu);
    let mgravT = T::from_f64(mgrav);
    let one = T::from_f64(1.0);
    let two = T::from_f64(2.0);
    let (px, py, qx, qy) = (src[0], src[1], src[2], src[3]);
    let r = (qx * qx + qy * qy).sqrt();
    if r.value() <= 0.0 {
        return Err(Error::DomainViolation {
            context: "planar chart at zero radius",
        });
    }
    let energy = (px * px + py * py) / (two * muT) - muT * mgravT / r;
    if energy.value() >= 0.0 {
        return Err(Error::NonElliptic {
            energy: energy.value(),
        });
    }
    let a = -(muT * mgravT) / (two * energy);
    let G = qx * py - qy * px;
    let L = muT * (mgravT * a).sqrt();
    if (G / L).value() < RECTILINEAR_TOL {
        return Err(Error::Rectilinear {
            ellipse: 0,
            ratio: (G / L).value(),
        });
    }
    if G.value() < 0.0 {
        return Err(Error::DomainViolation {
            context: "planar chart requires a prograde orbit",
        });
    }
    // e_vec = (P × c)/(mu² mgrav) − Q̂ with c = G ẑ
    let s = one / (muT * muT * mgravT);
    let ex = py * G * s - qx / r;
    let ey = -(px * G) * s - qy / r;
    let e = (ex * ex + ey * ey).sqrt();
    if e.value() < CIRCULAR_TOL {
        return Err(Error::Circular {
            ellipse: 0,
            e: e.value(),
        });
    }
    let g = wrap_angle(ey.atan2(ex));
    let e_cos = one - r / a;
    let n = (mgravT / (a * a * a)).sqrt();
    let e_sin = (qx * px + qy * py) / (muT * n * a * a);
    let l = wrap_angle(e_sin.atan2(e_cos) - e_sin);
    Ok(vec![L, G, l, g])
}

#[allow(non_snake_case)]
fn planar_delaunay_inverse(tgt: &[f64], mu: f64, mgrav: f64) -> Result<Vec<f64>> {
    let (L, G, l, g) = (tgt[0], tgt[1], tgt[2], tgt[3]);
    if L <= 0.0 || G <= 0.0 || G > L * (1.0 + 1e-12) {
        return Err(Error::InvalidElements(format!(
            "planar Delaunay needs 0 < G ≤ L, got L = {L}, G = {G}"
        )));
    }
    let a = L * L / (mu * mu * mgrav);
    let e = (1.0 - (G / L).powi(2)).max(0.0).sqrt();
    let ecc_anom = solve_kepler(l, e)?;
    let (sin_e, cos_e) = ecc_anom.sin_cos();
    let beta = (1.0 - e * e).sqrt();
    let (xp, yp) = (a * (cos_e - e), a * beta * sin_e);
    let n = (mgrav / (a * a * a)).sqrt();
    let fac = mu * n * a / (1.0 - e * cos_e);
    let (vxp, vyp) = (-fac * sin_e, fac * beta * cos_e);
    let (sin_g, cos_g) = g.sin_cos();
    Ok(vec![
        vxp * cos_g - vyp * sin_g,
        vxp * sin_g + vyp * cos_g,
        xp * cos_g - yp * sin_g,
        xp * sin_g + yp * cos_g,
    ])
}

/// The planar Delaunay chart `(Px, Py, Qx, Qy) → (L, G, l, g)` on prograde,
/// noncircular planar ellipses.
pub fn planar_delaunay_chart(mu: f64, mgrav: f64) -> Chart {
    Chart::new(
        "delaunay-planar",
        4,
        vec![(0, 2), (1, 3)],
        &[2, 3],
        move |x| planar_delaunay_forward::<f64>(x, mu, mgrav),
        move |y| planar_delaunay_inverse(y, mu, mgrav),
        move |x| planar_delaunay_forward::<f64>(x, mu, mgrav).is_ok(),
    )
    .with_dual_forward(move |x: &[Dual]| planar_delaunay_forward::<Dual>(x, mu, mgrav))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasespace::angle_diff;

    /// Independent Kepler oracle: plain bisection on the monotone residual.
    fn bisect_kepler(m: f64, e: f64) -> f64 {
        let (mut lo, mut hi) = (m - e, m + e);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - e * mid.sin() - m < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn kepler_identity_at_zero_eccentricity() {
        assert_eq!(solve_kepler(1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn kepler_symmetry_point() {
        assert!((solve_kepler(PI, 0.5).unwrap() - PI).abs() < 1e-14);
    }

    #[test]
    fn kepler_matches_bisection_oracle() {
        let e = 0.5;
        let expected = bisect_kepler(1.0, e);
        assert!((solve_kepler(1.0, e).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn kepler_rejects_bad_eccentricity() {
        assert!(solve_kepler(1.0, 1.0).is_err());
        assert!(solve_kepler(1.0, -0.1).is_err());
        assert!(solve_kepler(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn kepler_residual_on_grid() {
        for i in 0..40 {
            let m = i as f64 * TAU / 40.0;
            for &e in &[0.0, 0.3, 0.9, 0.99] {
                let ecc = solve_kepler(m, e).unwrap();
                let res = angle_diff(ecc - e * ecc.sin(), m).abs();
                assert!(res < 1e-13, "residual {res} at M={m}, e={e}");
            }
        }
    }

    use std::f64::consts::TAU;

    #[test]
    fn circular_equatorial_elements() {
        let el =
            cartesian_to_elements(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 1.0, 1.0)
                .unwrap();
        assert!((el.a - 1.0).abs() < 1e-14);
        assert!(el.e < 1e-14);
        assert!(el.flags.circular);
        assert!(el.i.abs() < 1e-14);
        assert!(el.flags.horizontal);
    }

    #[test]
    fn hyperbolic_is_rejected() {
        let err =
            cartesian_to_elements(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0), 1.0, 1.0)
                .unwrap_err();
        match err {
            Error::NonElliptic { energy } => assert!((energy - 1.0).abs() < 1e-14),
            other => panic!("expected NonElliptic, got {other:?}"),
        }
    }

    #[test]
    fn circular_equatorial_cartesian() {
        let el = OrbitalElements {
            a: 1.0,
            e: 0.0,
            i: 0.0,
            arg_peri: 0.0,
            node: 0.0,
            mean_anom: 0.0,
            flags: OrbitFlags {
                circular: true,
                horizontal: true,
                rectilinear: false,
            },
        };
        let (q, p) = elements_to_cartesian(&el, 1.0, 1.0).unwrap();
        assert!((q - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
        assert!((p - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn polar_orbit_lies_in_xz_plane() {
        let el = OrbitalElements {
            a: 1.0,
            e: 0.0,
            i: PI / 2.0,
            arg_peri: 0.0,
            node: 0.0,
            mean_anom: 0.0,
            flags: OrbitFlags::default(),
        };
        let (q, p) = elements_to_cartesian(&el, 1.0, 1.0).unwrap();
        assert!((q - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
        assert!((p - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn delaunay_direct_substitution() {
        let el = OrbitalElements {
            a: 4.0,
            e: 3f64.sqrt() / 2.0,
            i: PI / 3.0,
            arg_peri: 0.4,
            node: 1.1,
            mean_anom: 2.2,
            flags: OrbitFlags::default(),
        };
        let d = elements_to_delaunay(&el, 1.0, 1.0).unwrap();
        assert!((d.L - 2.0).abs() < 1e-14);
        assert!((d.G - 1.0).abs() < 1e-14);
        assert!((d.H - 0.5).abs() < 1e-14);
        // circular equatorial at a = 1: L = G = H = 1
        let circ = OrbitalElements {
            a: 1.0,
            e: 0.0,
            i: 0.0,
            ..el
        };
        let dc = elements_to_delaunay(&circ, 1.0, 1.0).unwrap();
        assert!((dc.L - 1.0).abs() < 1e-14 && (dc.G - 1.0).abs() < 1e-14 && (dc.H - 1.0).abs() < 1e-14);
    }

    #[test]
    fn delaunay_inverse_recovers_shape() {
        let mut rng = 1234567u64;
        let mut next = move || {
            // xorshift, deterministic and dependency-free
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let a = 0.5 + 2.0 * next();
            let e = 0.05 + 0.85 * next();
            let i = 0.05 + (PI - 0.1) * next();
            let el = OrbitalElements {
                a,
                e,
                i,
                arg_peri: TAU * next(),
                node: TAU * next(),
                mean_anom: TAU * next(),
                flags: OrbitFlags::default(),
            };
            let (mu, mgrav) = (0.5 + next(), 0.5 + next());
            let d = elements_to_delaunay(&el, mu, mgrav).unwrap();
            let back = delaunay_to_elements(&d, mu, mgrav).unwrap();
            assert!((back.a - a).abs() < 1e-12 * a.max(1.0));
            assert!((back.e - e).abs() < 1e-12);
            assert!((back.i - i).abs() < 1e-12);
        }
    }

    #[test]
    fn delaunay_invariant_violation_is_rejected() {
        assert!(DelaunayElements::new(1.0, 0.0, 1.5, 0.0, 0.5, 0.0).is_err()); // G > L
        assert!(DelaunayElements::new(1.0, 0.0, 0.5, 0.0, 0.7, 0.0).is_err()); // |H| > G
        assert!(DelaunayElements::new(-1.0, 0.0, 0.5, 0.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn energy_and_mean_motion() {
        assert!((keplerian_energy(1.0, 1.0, 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert!((mean_motion(1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        // n = dK/dL by central differences
        let (mu, mgrav, l0) = (0.7, 1.3, 1.2);
        let h = 1e-5;
        let fd = (keplerian_energy(l0 + h, mu, mgrav).unwrap()
            - keplerian_energy(l0 - h, mu, mgrav).unwrap())
            / (2.0 * h);
        let n = mean_motion(l0, mu, mgrav).unwrap();
        assert!((fd - n).abs() < 1e-8 * n.abs());
        // consistency n = sqrt(mgrav / a^3)
        let a = l0 * l0 / (mu * mu * mgrav);
        assert!((n - (mgrav / a.powi(3)).sqrt()).abs() < 1e-13 * n);
    }

    #[test]
    fn cartesian_roundtrip_recovers_elements() {
        let cases = [
            (1.3, 0.4, 0.7, 0.3, 5.9, 1.0, 0.8, 1.1),
            (0.7, 0.15, 2.6, 4.0, 2.0, 3.0, 1.0, 1.0),
            (2.4, 0.75, 1.2, 6.0, 0.4, 5.5, 0.6, 1.7),
        ];
        for &(a, e, i, w, o, m, mu, mgrav) in &cases {
            let el = OrbitalElements {
                a,
                e,
                i,
                arg_peri: w,
                node: o,
                mean_anom: m,
                flags: OrbitFlags::default(),
            };
            let (q, p) = elements_to_cartesian(&el, mu, mgrav).unwrap();
            // output energy matches −mu·mgrav/(2a)
            let energy = p.norm_squared() / (2.0 * mu) - mu * mgrav / q.norm();
            assert!((energy + mu * mgrav / (2.0 * a)).abs() < 1e-12);
            let back = cartesian_to_elements(q, p, mu, mgrav).unwrap();
            assert!((back.a - a).abs() < 1e-10 * a);
            assert!((back.e - e).abs() < 1e-10);
            assert!((back.i - i).abs() < 1e-10);
            assert!(angle_diff(back.arg_peri, w).abs() < 1e-9);
            assert!(angle_diff(back.node, o).abs() < 1e-10);
            assert!(angle_diff(back.mean_anom, m).abs() < 1e-9);
        }
    }

    #[test]
    fn angular_momentum_matches_delaunay_actions() {
        let el = OrbitalElements {
            a: 1.7,
            e: 0.35,
            i: 1.0,
            arg_peri: 0.6,
            node: 2.0,
            mean_anom: 3.0,
            flags: OrbitFlags::default(),
        };
        let (mu, mgrav) = (0.8, 1.4);
        let (q, p) = elements_to_cartesian(&el, mu, mgrav).unwrap();
        let d = elements_to_delaunay(&el, mu, mgrav).unwrap();
        let c = q.cross(p);
        assert!((c.norm() - d.G).abs() < 1e-12);
        assert!((c.z - d.H).abs() < 1e-12);
    }
}
