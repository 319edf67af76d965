use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use filmforge_core::qnet::{forward, gradient, init_params, Sample};
use filmforge_core::{AimWeights, Layer, MaterialLibrary, MaterialTable, SpectralGrid, StackEvaluator, StackTemplate};

fn absorber() -> StackEvaluator {
    let lib = MaterialLibrary::bundled();
    let (si, ti) = (lib.get("SiO2").unwrap(), lib.get("Ti").unwrap());
    let template = StackTemplate {
        incident: Arc::new(MaterialTable::air()),
        free: vec![si.clone(), ti, si],
        backing: vec![Layer::new(lib.get("Cu").unwrap(), 200.0)],
        substrate: lib.get("glass").unwrap(),
    };
    StackEvaluator::new(&template, SpectralGrid::new(300.0, 1500.0, 121).unwrap()).unwrap()
}

fn optics(c: &mut Criterion) {
    let ev = absorber();
    let w = AimWeights::absorber();
    c.bench_function("aim_absorber4_121pts", |b| {
        b.iter(|| ev.aim(black_box(&[98.0, 9.0, 110.0]), &w).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let p = init_params(9, 18, 0);
    let obs = vec![0.3; 9];
    c.bench_function("qnet_forward_9x18", |b| b.iter(|| forward(&p, black_box(&obs)).unwrap()));
    let batch: Vec<Sample> = (0..32)
        .map(|i| Sample {
            observation: vec![0.01 * i as f64; 9],
            action: i % 18,
            reward: 0.001,
            next_observation: vec![0.01 * i as f64 + 0.01; 9],
            terminal: i % 7 == 0,
        })
        .collect();
    c.bench_function("qnet_gradient_batch32", |b| b.iter(|| gradient(&p, black_box(&batch), 0.9).unwrap()));
}

criterion_group!(benches, optics, network);
criterion_main!(benches);
