use std::sync::Arc;

use filmforge_core::optics::{
    aim_value, characteristic_matrix_for, evaluate_rta, evaluate_rta_unclamped, spectral_response, Matrix2,
};
use filmforge_core::{AimWeights, Layer, MaterialLibrary, MaterialTable, SpectralGrid, StackDesign};
use num_complex::Complex64;
use proptest::prelude::*;

fn constant(name: &str, n: f64, k: f64) -> Arc<MaterialTable> {
    Arc::new(MaterialTable::constant(name, n, k, 200.0, 2000.0).unwrap())
}

/// Field matrix of forward and backward plane waves at depth `z`:
/// columns are the two waves, rows are tangential E and H.
fn field_matrix(index: Complex64, k0: f64, z: f64) -> [[Complex64; 2]; 2] {
    let i = Complex64::i();
    let fwd = (-i * index * k0 * z).exp();
    let bwd = (i * index * k0 * z).exp();
    [[fwd, bwd], [index * fwd, -index * bwd]]
}

fn inv2(m: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

fn mul2(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// Maps the fields at the exit face to the fields at the entry face by
/// propagating the two plane waves through the film.
fn propagation_oracle(index: Complex64, d: f64, wavelength: f64) -> Matrix2 {
    let k0 = 2.0 * std::f64::consts::PI / wavelength;
    mul2(&field_matrix(index, k0, 0.0), &inv2(&field_matrix(index, k0, d)))
}

fn max_diff(a: &Matrix2, b: &Matrix2) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn characteristic_matrix_matches_wave_propagation() {
    let m = characteristic_matrix_for(Complex64::new(1.38, 0.0), 99.6, 550.0);
    assert!(max_diff(&m, &propagation_oracle(Complex64::new(1.38, 0.0), 99.6, 550.0)) < 1e-9);
    let delta = 2.0 * std::f64::consts::PI * 1.38 * 99.6 / 550.0;
    assert!((delta - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
}

proptest! {
    #[test]
    fn characteristic_matrix_matches_oracle_for_absorbers(
        n in 1.0f64..4.0, k in 0.0f64..3.0, d in 0.0f64..300.0, wl in 300.0f64..1500.0,
    ) {
        let idx = Complex64::new(n, -k);
        let got = characteristic_matrix_for(idx, d, wl);
        let want = propagation_oracle(idx, d, wl);
        let scale = want.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(max_diff(&got, &want) / scale < 1e-9);
    }
}

#[test]
fn bare_interface_and_quarter_wave() {
    let glass = constant("glass", 1.5, 0.0);
    let bare = StackDesign::in_air(vec![Layer::new(constant("f", 1.38, 0.0), 0.0)], glass.clone()).unwrap();
    assert!((evaluate_rta(&bare, 550.0).unwrap().r - 0.04).abs() < 1e-12);

    let d = 550.0 / (4.0 * 1.38);
    let qw = StackDesign::in_air(vec![Layer::new(constant("f", 1.38, 0.0), d)], glass).unwrap();
    let want = ((1.5 - 1.38f64.powi(2)) / (1.5 + 1.38f64.powi(2))).powi(2);
    assert!((want - 0.01411).abs() < 1e-5);
    assert!((evaluate_rta(&qw, 550.0).unwrap().r - want).abs() < 1e-12);
}

#[test]
fn opaque_copper_backing_blocks_transmission() {
    let lib = MaterialLibrary::bundled();
    let stack = StackDesign::in_air(
        vec![
            Layer::new(lib.get("SiO2").unwrap(), 80.0),
            Layer::new(lib.get("Cu").unwrap(), 200.0),
        ],
        lib.get("glass").unwrap(),
    )
    .unwrap();
    let resp = spectral_response(&stack, &SpectralGrid::new(300.0, 1500.0, 121).unwrap()).unwrap();
    assert!(resp.t.iter().all(|&t| t < 0.01), "max T {:?}", resp.t.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn band_mean_converges_under_grid_refinement() {
    let lib = MaterialLibrary::bundled();
    let layers = [("SiO2", 77.5), ("Ti", 13.74), ("SiO2", 132.4), ("Cu", 200.0)]
        .iter()
        .map(|(m, d)| Layer::new(lib.get(m).unwrap(), *d))
        .collect();
    let stack = StackDesign::in_air(layers, lib.get("glass").unwrap()).unwrap();
    let coarse = spectral_response(&stack, &SpectralGrid::new(300.0, 1500.0, 301).unwrap()).unwrap();
    let fine = spectral_response(&stack, &SpectralGrid::new(300.0, 1500.0, 601).unwrap()).unwrap();
    assert!((coarse.mean_a - fine.mean_a).abs() < 1e-3);
}

const BUNDLED: &[&str] = &["Al", "Cr", "Cu", "MgF2", "SiO2", "Ti", "ZnS", "glass"];
const LOSSLESS: &[&str] = &["MgF2", "SiO2", "glass"];

fn stack_of(lib: &MaterialLibrary, names: &[usize], pool: &[&str], d: &[f64], sub: usize) -> StackDesign {
    let layers = names
        .iter()
        .zip(d)
        .map(|(&i, &t)| Layer::new(lib.get(pool[i % pool.len()]).unwrap(), t))
        .collect();
    StackDesign::in_air(layers, lib.get(pool[sub % pool.len()]).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn absorbing_stacks_stay_in_unit_interval(
        mats in prop::collection::vec(0usize..8, 1..8),
        d in prop::collection::vec(0.0f64..300.0, 8),
        sub in 0usize..8,
        wl in 300.0f64..1500.0,
    ) {
        let lib = MaterialLibrary::bundled();
        let stack = stack_of(&lib, &mats, BUNDLED, &d, sub);
        let rta = evaluate_rta_unclamped(&stack, wl).unwrap();
        for v in [rta.r, rta.t, rta.a] {
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&v));
        }
        prop_assert!((rta.r + rta.t + rta.a - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lossless_stacks_conserve_energy(
        mats in prop::collection::vec(0usize..3, 1..10),
        d in prop::collection::vec(0.0f64..400.0, 10),
        wl in 300.0f64..1500.0,
    ) {
        let lib = MaterialLibrary::bundled();
        let stack = stack_of(&lib, &mats, LOSSLESS, &d, 2);
        let rta = evaluate_rta_unclamped(&stack, wl).unwrap();
        prop_assert!(rta.a.abs() < 1e-9, "A = {}", rta.a);
    }

    #[test]
    fn zero_thickness_layer_is_invisible(
        mats in prop::collection::vec(0usize..8, 1..6),
        d in prop::collection::vec(0.0f64..300.0, 6),
        insert_at in 0usize..6,
        extra in 0usize..8,
        wl in 300.0f64..1500.0,
    ) {
        let lib = MaterialLibrary::bundled();
        let base = stack_of(&lib, &mats, BUNDLED, &d, 7);
        let mut layers = base.layers().to_vec();
        layers.insert(insert_at.min(layers.len()), Layer::new(lib.get(BUNDLED[extra]).unwrap(), 0.0));
        let padded = StackDesign::in_air(layers, base.substrate().clone()).unwrap();
        let (a, b) = (evaluate_rta(&base, wl).unwrap(), evaluate_rta(&padded, wl).unwrap());
        prop_assert!((a.r - b.r).abs() < 1e-12 && (a.t - b.t).abs() < 1e-12 && (a.a - b.a).abs() < 1e-12);
    }

    #[test]
    fn splitting_a_lossless_layer_changes_nothing(
        mats in prop::collection::vec(0usize..3, 1..6),
        d in prop::collection::vec(1.0f64..300.0, 6),
        which in 0usize..6,
        frac in 0.0f64..1.0,
        wl in 300.0f64..1500.0,
    ) {
        let lib = MaterialLibrary::bundled();
        let base = stack_of(&lib, &mats, LOSSLESS, &d, 2);
        let mut layers = base.layers().to_vec();
        let i = which % layers.len();
        let whole = layers[i].clone();
        layers[i].thickness_nm = whole.thickness_nm * frac;
        layers.insert(i + 1, Layer::new(whole.material.clone(), whole.thickness_nm * (1.0 - frac)));
        let split = StackDesign::in_air(layers, base.substrate().clone()).unwrap();
        let (a, b) = (evaluate_rta(&base, wl).unwrap(), evaluate_rta(&split, wl).unwrap());
        prop_assert!((a.r - b.r).abs() < 1e-9 && (a.t - b.t).abs() < 1e-9 && (a.a - b.a).abs() < 1e-9);
    }

    #[test]
    fn aim_is_linear_in_weights(
        w1 in prop::array::uniform3(-2.0f64..2.0),
        w2 in prop::array::uniform3(-2.0f64..2.0),
        d in 0.0f64..300.0,
    ) {
        let lib = MaterialLibrary::bundled();
        let stack = StackDesign::in_air(
            vec![Layer::new(lib.get("Ti").unwrap(), d), Layer::new(lib.get("SiO2").unwrap(), 80.0)],
            lib.get("glass").unwrap(),
        ).unwrap();
        let resp = spectral_response(&stack, &SpectralGrid::new(400.0, 700.0, 31).unwrap()).unwrap();
        let aim = |w: [f64; 3]| aim_value(&resp, &AimWeights { t: w[0], r: w[1], a: w[2] });
        let sum = [w1[0] + w2[0], w1[1] + w2[1], w1[2] + w2[2]];
        prop_assert!((aim(sum) - (aim(w1) + aim(w2))).abs() < 1e-12);
    }
}
