use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikeflag_core::{EncodingConfig, EncodingMethod};

fn bench_encoders(c: &mut Criterion) {
    let p = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let values: Vec<f32> = (0..p * p).map(|_| rng.random()).collect();
    for method in EncodingMethod::ALL {
        let enc = EncodingConfig::new(method, 8);
        c.bench_function(&format!("encode/{method}"), |b| {
            b.iter(|| enc.encode_input(&values, p, p, 1).unwrap())
        });
    }
}

criterion_group!(benches, bench_encoders);
criterion_main!(benches);
