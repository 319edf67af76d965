//! Normal-incidence transfer-matrix optics.
//!
//! Conventions: complex index `N = n - i·k`, time dependence `e^{+iωt}`,
//! optical admittance normalised to free space so that `η = N`. Each layer has
//! the characteristic matrix
//!
//! ```text
//! M = | cos δ        i·sin δ / η |      δ = 2π·N·d / λ
//!     | i·η·sin δ    cos δ       |
//! ```
//!
//! and the stack response follows from `[B, C]ᵀ = M₁·M₂·…·M_q·[1, η_s]ᵀ`.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{coverage_check, Coverage, MaterialTable};

/// Tolerance on `R`, `T`, `A` leaving `[0, 1]` before they are clamped.
pub const CLOSURE_TOLERANCE: f64 = 1e-9;

/// 2×2 complex matrix, row major.
pub type Matrix2 = [[Complex64; 2]; 2];

pub const IDENTITY: Matrix2 = [
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
];

pub fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn determinant(m: &Matrix2) -> Complex64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// One homogeneous film.
#[derive(Debug, Clone)]
pub struct Layer {
    pub material: Arc<MaterialTable>,
    pub thickness_nm: f64,
}

impl Layer {
    pub fn new(material: Arc<MaterialTable>, thickness_nm: f64) -> Self {
        Self { material, thickness_nm }
    }
}

/// A complete multilayer: incident medium, films from the incident side
/// inwards, and a semi-infinite substrate.
#[derive(Debug, Clone)]
pub struct StackDesign {
    incident: Arc<MaterialTable>,
    layers: Vec<Layer>,
    substrate: Arc<MaterialTable>,
}

impl StackDesign {
    pub fn new(incident: Arc<MaterialTable>, layers: Vec<Layer>, substrate: Arc<MaterialTable>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("a stack needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            check_thickness(i + 1, layer.thickness_nm)?;
        }
        Ok(Self { incident, layers, substrate })
    }

    /// Stack in air.
    pub fn in_air(layers: Vec<Layer>, substrate: Arc<MaterialTable>) -> Result<Self> {
        Self::new(Arc::new(MaterialTable::air()), layers, substrate)
    }

    pub fn incident(&self) -> &Arc<MaterialTable> {
        &self.incident
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn substrate(&self) -> &Arc<MaterialTable> {
        &self.substrate
    }

    fn materials(&self) -> impl Iterator<Item = &MaterialTable> {
        std::iter::once(self.incident.as_ref())
            .chain(self.layers.iter().map(|l| l.material.as_ref()))
            .chain(std::iter::once(self.substrate.as_ref()))
    }

    /// Fails with a validation error listing every material that does not span the band.
    pub fn check_coverage(&self, grid: &SpectralGrid) -> Result<()> {
        ensure_coverage(self.materials(), grid)
    }
}

fn ensure_coverage<'a>(materials: impl Iterator<Item = &'a MaterialTable>, grid: &SpectralGrid) -> Result<()> {
    if grid.min_nm == grid.max_nm {
        // single wavelength: coverage_check needs a proper interval
        for m in materials {
            m.index_at(grid.min_nm)?;
        }
        return Ok(());
    }
    match coverage_check(materials, grid.min_nm, grid.max_nm)? {
        Coverage::Complete => Ok(()),
        Coverage::Gaps(gaps) => Err(Error::Validation(
            gaps.iter().map(|g| g.to_string()).collect::<Vec<_>>().join("; "),
        )),
    }
}

fn check_thickness(index: usize, thickness_nm: f64) -> Result<()> {
    if !thickness_nm.is_finite() || thickness_nm < 0.0 {
        return Err(Error::Validation(format!(
            "layer {index}: thickness must be finite and >= 0 nm, got {thickness_nm}"
        )));
    }
    Ok(())
}

/// Characteristic matrix of a film of index `index` and thickness `thickness_nm`.
pub fn characteristic_matrix_for(index: Complex64, thickness_nm: f64, wavelength_nm: f64) -> Matrix2 {
    let delta = index * (2.0 * std::f64::consts::PI * thickness_nm / wavelength_nm);
    let (sin, cos) = (delta.sin(), delta.cos());
    let i = Complex64::i();
    [[cos, i * sin / index], [i * index * sin, cos]]
}

/// Characteristic matrix of `layer` at `wavelength_nm`.
pub fn characteristic_matrix(layer: &Layer, wavelength_nm: f64) -> Result<Matrix2> {
    check_thickness(1, layer.thickness_nm)?;
    let index = layer.material.index_at(wavelength_nm)?;
    Ok(characteristic_matrix_for(index, layer.thickness_nm, wavelength_nm))
}

/// Reflectance, transmittance and absorptance at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rta {
    pub r: f64,
    pub t: f64,
    pub a: f64,
}

impl Rta {
    fn clamped(self) -> Self {
        Self {
            r: self.r.clamp(0.0, 1.0),
            t: self.t.clamp(0.0, 1.0),
            a: self.a.clamp(0.0, 1.0),
        }
    }
}

/// Core transfer-matrix evaluation on resolved indices. Returns unclamped values.
fn rta_from_indices(
    incident: Complex64,
    films: impl Iterator<Item = (Complex64, f64)>,
    substrate: Complex64,
    wavelength_nm: f64,
) -> Result<Rta> {
    let mut m = IDENTITY;
    for (layer_no, (index, thickness)) in films.enumerate() {
        m = mat_mul(&m, &characteristic_matrix_for(index, thickness, wavelength_nm));
        if !m.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite transfer matrix at {wavelength_nm} nm after layer {}",
                layer_no + 1
            )));
        }
    }
    let b = m[0][0] + m[0][1] * substrate;
    let c = m[1][0] + m[1][1] * substrate;
    let denom = incident * b + c;
    let r = ((incident * b - c) / denom).norm_sqr();
    let t = 4.0 * incident.re * substrate.re / denom.norm_sqr();
    let a = 1.0 - r - t;
    let rta = Rta { r, t, a };
    let ok = |v: f64| v.is_finite() && (-CLOSURE_TOLERANCE..=1.0 + CLOSURE_TOLERANCE).contains(&v);
    if !(ok(r) && ok(t) && ok(a)) {
        return Err(Error::Numeric(format!(
            "energy closure violated at {wavelength_nm} nm: R = {r}, T = {t}, A = {a}"
        )));
    }
    Ok(rta)
}

/// `(R, T, A)` before clamping to `[0, 1]`; exposed for closure diagnostics.
pub fn evaluate_rta_unclamped(stack: &StackDesign, wavelength_nm: f64) -> Result<Rta> {
    let incident = stack.incident.index_at(wavelength_nm)?;
    let substrate = stack.substrate.index_at(wavelength_nm)?;
    let films = stack
        .layers
        .iter()
        .map(|l| Ok((l.material.index_at(wavelength_nm)?, l.thickness_nm)))
        .collect::<Result<Vec<_>>>()?;
    rta_from_indices(incident, films.into_iter(), substrate, wavelength_nm)
}

/// `(R, T, A)` of `stack` at `wavelength_nm`, clamped to `[0, 1]`.
pub fn evaluate_rta(stack: &StackDesign, wavelength_nm: f64) -> Result<Rta> {
    evaluate_rta_unclamped(stack, wavelength_nm).map(Rta::clamped)
}

/// Uniform, inclusive wavelength grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub min_nm: f64,
    pub max_nm: f64,
    pub points: usize,
}

impl SpectralGrid {
    pub fn new(min_nm: f64, max_nm: f64, points: usize) -> Result<Self> {
        if !(min_nm.is_finite() && max_nm.is_finite() && min_nm > 0.0 && min_nm < max_nm) {
            return Err(Error::Validation(format!(
                "band must satisfy 0 < lower < upper, got {min_nm}-{max_nm} nm"
            )));
        }
        if points < 2 {
            return Err(Error::Validation(format!("grid needs at least 2 points, got {points}")));
        }
        Ok(Self { min_nm, max_nm, points })
    }

    /// A single-wavelength "band".
    pub fn single(wavelength_nm: f64) -> Result<Self> {
        if !(wavelength_nm.is_finite() && wavelength_nm > 0.0) {
            return Err(Error::Validation(format!("invalid wavelength {wavelength_nm}")));
        }
        Ok(Self {
            min_nm: wavelength_nm,
            max_nm: wavelength_nm,
            points: 1,
        })
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min_nm];
        }
        let last = self.points - 1;
        let span = self.max_nm - self.min_nm;
        (0..self.points)
            .map(|i| {
                if i == last {
                    self.max_nm
                } else {
                    self.min_nm + span * (i as f64) / (last as f64)
                }
            })
            .collect()
    }
}

/// Per-wavelength response plus unweighted band means.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResponse {
    pub wavelengths_nm: Vec<f64>,
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub mean_r: f64,
    pub mean_t: f64,
    pub mean_a: f64,
}

impl SpectralResponse {
    fn from_points(wavelengths_nm: Vec<f64>, points: Vec<Rta>) -> Self {
        let r: Vec<f64> = points.iter().map(|p| p.r).collect();
        let t: Vec<f64> = points.iter().map(|p| p.t).collect();
        let a: Vec<f64> = points.iter().map(|p| p.a).collect();
        Self {
            mean_r: mean(&r),
            mean_t: mean(&t),
            mean_a: mean(&a),
            wavelengths_nm,
            r,
            t,
            a,
        }
    }

    pub fn means(&self) -> Rta {
        Rta {
            r: self.mean_r,
            t: self.mean_t,
            a: self.mean_a,
        }
    }

    /// Band means weighted per wavelength (e.g. by a solar spectrum).
    pub fn weighted_means(&self, weights: &[f64]) -> Result<Rta> {
        if weights.len() != self.wavelengths_nm.len() {
            return Err(Error::Contract(format!(
                "{} spectral weights for {} grid points",
                weights.len(),
                self.wavelengths_nm.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Validation("spectral weights must have a positive finite sum".into()));
        }
        let dot = |v: &[f64]| v.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total;
        Ok(Rta {
            r: dot(&self.r),
            t: dot(&self.t),
            a: dot(&self.a),
        })
    }

    /// Spectrum CSV: header `wavelength_nm,R,T,A`, 6 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("wavelength_nm,R,T,A\n");
        for i in 0..self.wavelengths_nm.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                format_sig6(self.wavelengths_nm[i]),
                format_sig6(self.r[i]),
                format_sig6(self.t[i]),
                format_sig6(self.a[i])
            );
        }
        out
    }
}

// Fixed left-to-right reduction keeps means reproducible.
fn mean(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v) / values.len() as f64
}

/// Evaluates `stack` on every grid wavelength.
pub fn spectral_response(stack: &StackDesign, grid: &SpectralGrid) -> Result<SpectralResponse> {
    let wavelengths = grid.wavelengths();
    let points = wavelengths
        .iter()
        .map(|&wl| evaluate_rta(stack, wl))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralResponse::from_points(wavelengths, points))
}

/// Weights of the merit function `w_T·T + w_R·R + w_A·A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AimWeights {
    pub t: f64,
    pub r: f64,
    pub a: f64,
}

impl AimWeights {
    pub fn new(t: f64, r: f64, a: f64) -> Result<Self> {
        let w = Self { t, r, a };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.r.is_finite() && self.a.is_finite()) {
            return Err(Error::Validation("aim weights must be finite".into()));
        }
        if self.t == 0.0 && self.r == 0.0 && self.a == 0.0 {
            return Err(Error::Validation("aim weights must not all be zero".into()));
        }
        Ok(())
    }

    /// Selective absorber: maximise absorption, penalise reflection.
    pub fn absorber() -> Self {
        Self { t: 0.0, r: -1.0, a: 1.0 }
    }

    /// Anti-reflection: maximise transmission, penalise reflection.
    pub fn anti_reflection() -> Self {
        Self { t: 1.0, r: -1.0, a: 0.0 }
    }

    /// Merit of a set of band means.
    pub fn score(&self, means: &Rta) -> f64 {
        self.t * means.t + self.r * means.r + self.a * means.a
    }
}

/// Scalar merit of a response.
pub fn aim_value(response: &SpectralResponse, weights: &AimWeights) -> f64 {
    weights.score(&response.means())
}

/// A stack whose free-layer thicknesses are left open: incident medium, free
/// films, fixed backing films (e.g. an opaque metal) and substrate.
#[derive(Debug, Clone)]
pub struct StackTemplate {
    pub incident: Arc<MaterialTable>,
    pub free: Vec<Arc<MaterialTable>>,
    pub backing: Vec<Layer>,
    pub substrate: Arc<MaterialTable>,
}

impl StackTemplate {
    pub fn free_layer_count(&self) -> usize {
        self.free.len()
    }

    pub fn with_thicknesses(&self, thicknesses_nm: &[f64]) -> Result<StackDesign> {
        if thicknesses_nm.len() != self.free.len() {
            return Err(Error::Contract(format!(
                "{} thicknesses given for {} free layers",
                thicknesses_nm.len(),
                self.free.len()
            )));
        }
        let layers = self
            .free
            .iter()
            .zip(thicknesses_nm)
            .map(|(m, &d)| Layer::new(m.clone(), d))
            .chain(self.backing.iter().cloned())
            .collect();
        StackDesign::new(self.incident.clone(), layers, self.substrate.clone())
    }
}

/// Evaluates many thickness vectors of one template on a fixed grid, with all
/// refractive indices looked up once up front.
#[derive(Debug, Clone)]
pub struct StackEvaluator {
    grid: SpectralGrid,
    wavelengths: Vec<f64>,
    incident: Vec<Complex64>,
    /// `free[l][w]`: index of free layer `l` at wavelength `w`.
    free: Vec<Vec<Complex64>>,
    backing: Vec<(Vec<Complex64>, f64)>,
    substrate: Vec<Complex64>,
}

impl StackEvaluator {
    pub fn new(template: &StackTemplate, grid: SpectralGrid) -> Result<Self> {
        if template.free.is_empty() {
            return Err(Error::Validation("template needs at least one free layer".into()));
        }
        for (i, b) in template.backing.iter().enumerate() {
            check_thickness(template.free.len() + i + 1, b.thickness_nm)?;
        }
        let materials = std::iter::once(template.incident.as_ref())
            .chain(template.free.iter().map(|m| m.as_ref()))
            .chain(template.backing.iter().map(|l| l.material.as_ref()))
            .chain(std::iter::once(template.substrate.as_ref()));
        ensure_coverage(materials, &grid)?;

        let wavelengths = grid.wavelengths();
        let lookup = |m: &MaterialTable| wavelengths.iter().map(|&wl| m.index_at(wl)).collect::<Result<Vec<_>>>();
        Ok(Self {
            grid,
            incident: lookup(&template.incident)?,
            free: template.free.iter().map(|m| lookup(m)).collect::<Result<_>>()?,
            backing: template
                .backing
                .iter()
                .map(|l| Ok((lookup(&l.material)?, l.thickness_nm)))
                .collect::<Result<_>>()?,
            substrate: lookup(&template.substrate)?,
            wavelengths,
        })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn free_layer_count(&self) -> usize {
        self.free.len()
    }

    fn point(&self, w: usize, thicknesses_nm: &[f64]) -> Result<Rta> {
        let films = self
            .free
            .iter()
            .zip(thicknesses_nm)
            .map(|(idx, &d)| (idx[w], d))
            .chain(self.backing.iter().map(|(idx, d)| (idx[w], *d)));
        rta_from_indices(self.incident[w], films, self.substrate[w], self.wavelengths[w]).map(Rta::clamped)
    }

    fn check(&self, thicknesses_nm: &[f64]) -> Result<()> {
        if thicknesses_nm.len() != self.free.len() {
            return Err(Error::Contract(format!(
                "{} thicknesses given for {} free layers",
                thicknesses_nm.len(),
                self.free.len()
            )));
        }
        for (i, &d) in thicknesses_nm.iter().enumerate() {
            check_thickness(i + 1, d)?;
        }
        Ok(())
    }

    /// Full spectrum for the given free-layer thicknesses.
    pub fn response(&self, thicknesses_nm: &[f64]) -> Result<SpectralResponse> {
        self.check(thicknesses_nm)?;
        let points = (0..self.wavelengths.len())
            .map(|w| self.point(w, thicknesses_nm))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralResponse::from_points(self.wavelengths.clone(), points))
    }

    /// Band means only.
    pub fn means(&self, thicknesses_nm: &[f64]) -> Result<Rta> {
        Ok(self.response(thicknesses_nm)?.means())
    }

    /// Merit; same arithmetic as `aim_value(&self.response(..))`.
    pub fn aim(&self, thicknesses_nm: &[f64], weights: &AimWeights) -> Result<f64> {
        Ok(weights.score(&self.means(thicknesses_nm)?))
    }
}

/// Formats like C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    const PRECISION: i32 = 6;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant(name: &str, n: f64) -> Arc<MaterialTable> {
        Arc::new(MaterialTable::constant(name, n, 0.0, 200.0, 2000.0).unwrap())
    }

    #[test]
    fn zero_thickness_is_identity() {
        let m = characteristic_matrix(&Layer::new(constant("x", 2.3), 0.0), 633.0).unwrap();
        assert_eq!(m, IDENTITY);
    }

    #[test]
    fn quarter_wave_matrix() {
        let n = 1.38;
        let wl = 550.0;
        let m = characteristic_matrix(&Layer::new(constant("mgf2", n), wl / (4.0 * n)), wl).unwrap();
        let i = Complex64::i();
        let expected = [[Complex64::new(0.0, 0.0), i / n], [i * n, Complex64::new(0.0, 0.0)]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((m[r][c] - expected[r][c]).norm() < 1e-12, "{r}{c}: {}", m[r][c]);
            }
        }
        assert!((determinant(&m) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn bare_interface_fresnel() {
        let stack = StackDesign::in_air(vec![Layer::new(constant("glass", 1.5), 0.0)], constant("glass", 1.5)).unwrap();
        let rta = evaluate_rta(&stack, 500.0).unwrap();
        assert_abs_diff_eq!(rta.r, 0.04, epsilon = 1e-12);
        assert_abs_diff_eq!(rta.t, 0.96, epsilon = 1e-12);
        assert_abs_diff_eq!(rta.a, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn stack_validation() {
        assert!(StackDesign::in_air(vec![], constant("g", 1.5)).is_err());
        assert!(StackDesign::in_air(vec![Layer::new(constant("g", 1.5), -1.0)], constant("g", 1.5)).is_err());
        assert!(StackDesign::in_air(vec![Layer::new(constant("g", 1.5), f64::NAN)], constant("g", 1.5)).is_err());
    }

    #[test]
    fn out_of_range_wavelength_propagates() {
        let stack = StackDesign::in_air(vec![Layer::new(constant("g", 1.5), 10.0)], constant("g", 1.5)).unwrap();
        assert!(matches!(evaluate_rta(&stack, 100.0), Err(Error::OutOfRange { .. })));
        let grid = SpectralGrid::new(100.0, 700.0, 5).unwrap();
        assert!(matches!(stack.check_coverage(&grid), Err(Error::Validation(_))));
    }

    #[test]
    fn grid_endpoints() {
        let g = SpectralGrid::new(400.0, 700.0, 2).unwrap();
        assert_eq!(g.wavelengths(), vec![400.0, 700.0]);
        let g = SpectralGrid::new(300.0, 1500.0, 121).unwrap();
        let w = g.wavelengths();
        assert_eq!((w[0], w[60], w[120]), (300.0, 900.0, 1500.0));
        assert!(SpectralGrid::new(400.0, 700.0, 1).is_err());
        assert!(SpectralGrid::new(700.0, 400.0, 3).is_err());
        assert_eq!(SpectralGrid::single(550.0).unwrap().wavelengths(), vec![550.0]);
    }

    #[test]
    fn aim_examples() {
        let response = SpectralResponse {
            wavelengths_nm: vec![500.0],
            r: vec![0.0882],
            t: vec![0.0],
            a: vec![0.9118],
            mean_r: 0.0882,
            mean_t: 0.0,
            mean_a: 0.9118,
        };
        assert_abs_diff_eq!(aim_value(&response, &AimWeights::absorber()), 0.8236, epsilon = 1e-12);
        let ar = SpectralResponse {
            mean_r: 0.045,
            mean_t: 0.940,
            mean_a: 0.015,
            ..response.clone()
        };
        assert_abs_diff_eq!(aim_value(&ar, &AimWeights::anti_reflection()), 0.895, epsilon = 1e-12);
        let clear = SpectralResponse {
            mean_a: 0.0,
            ..response
        };
        assert_eq!(aim_value(&clear, &AimWeights::new(0.0, 0.0, 1.0).unwrap()), 0.0);
        assert!(AimWeights::new(0.0, 0.0, 0.0).is_err());
        assert!(AimWeights::new(f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn weighted_means_reduce_to_uniform() {
        let stack = StackDesign::in_air(vec![Layer::new(constant("a", 2.1), 120.0)], constant("g", 1.5)).unwrap();
        let grid = SpectralGrid::new(400.0, 700.0, 31).unwrap();
        let resp = spectral_response(&stack, &grid).unwrap();
        let w = resp.weighted_means(&[2.0; 31]).unwrap();
        assert_abs_diff_eq!(w.r, resp.mean_r, epsilon = 1e-15);
        assert!(resp.weighted_means(&[1.0; 3]).is_err());
    }

    #[test]
    fn evaluator_matches_direct_path() {
        let template = StackTemplate {
            incident: Arc::new(MaterialTable::air()),
            free: vec![constant("h", 2.3), constant("l", 1.38)],
            backing: vec![Layer::new(constant("m", 1.7), 40.0)],
            substrate: constant("g", 1.52),
        };
        let grid = SpectralGrid::new(400.0, 700.0, 13).unwrap();
        let eval = StackEvaluator::new(&template, grid).unwrap();
        let d = [57.0, 101.5];
        let fast = eval.response(&d).unwrap();
        let slow = spectral_response(&template.with_thicknesses(&d).unwrap(), &grid).unwrap();
        assert_eq!(fast, slow);
        assert!(matches!(eval.response(&[1.0]), Err(Error::Contract(_))));
        assert!(matches!(eval.response(&[1.0, -2.0]), Err(Error::Validation(_))));
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.04), "0.04");
        assert_eq!(format_sig6(0.96), "0.96");
        assert_eq!(format_sig6(400.0), "400");
        assert_eq!(format_sig6(1500.0), "1500");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(0.123456789), "0.123457");
        assert_eq!(format_sig6(1.0e-7), "1e-07");
        assert_eq!(format_sig6(2.5e-5), "2.5e-05");
        assert_eq!(format_sig6(0.0001), "0.0001");
        assert_eq!(format_sig6(1234567.0), "1.23457e+06");
        assert_eq!(format_sig6(999999.5), "1e+06");
        assert_eq!(format_sig6(533.333333), "533.333");
        assert_eq!(format_sig6(1.0), "1");
    }
}
