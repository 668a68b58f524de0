//! Regenerates the shipped instance corpus.
//!
//! ```text
//! cargo run -p plank-cli --example gen_corpus -- crates/cli/corpus
//! ```

use std::fs;
use std::path::PathBuf;

use plank::format::{to_json, BodySpec, Exponent, HyperplaneSpec, InstanceFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x0050_4c41_4e4b;

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn unit_diagonal(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { round4(rng.random_range(-spread..spread)) }).collect())
        .collect()
}

fn midpoints(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { round4(rng.random_range(-0.8..0.8)) }).collect()
}

/// Positive widths, each a multiple of 1e-4, summing to at most `total`.
fn widths(rng: &mut ChaCha8Rng, n: usize, total: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|r| ((r / s * total * 1e4).floor() / 1e4).max(1e-4)).collect()
}

fn geometry(rng: &mut ChaCha8Rng) -> InstanceFile {
    let dim = rng.random_range(2..=6);
    let n = rng.random_range(1..=10);
    let p = [1.0, 1.5, 2.0, 3.0, f64::INFINITY][rng.random_range(0..5)];
    let map = rng.random_bool(0.4).then(|| {
        (0..dim)
            .map(|i| (0..dim).map(|j| round4(f64::from(u8::from(i == j)) + rng.random_range(-0.4..0.4))).collect())
            .collect()
    });
    let hyperplanes = (0..n)
        .map(|_| HyperplaneSpec {
            normal: (0..dim).map(|_| round4(rng.random_range(-1.0..1.0))).collect(),
            offset: round4(rng.random_range(-0.6..0.6)),
        })
        .collect();
    InstanceFile::Geometry { body: BodySpec { kind: "lp".into(), p: Exponent::from_p(p), dim }, map, hyperplanes }
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/cli/corpus".into()));
    fs::create_dir_all(&dir).expect("create corpus directory");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut files: Vec<(String, InstanceFile)> = vec![
        (
            "basic-identity.json".into(),
            InstanceFile::Matrix { a: vec![vec![1.0, 0.0], vec![0.0, 1.0]], m: vec![0.0; 2], w: vec![0.5; 2] },
        ),
        (
            "basic-triangular.json".into(),
            InstanceFile::Matrix { a: vec![vec![1.0, 1.0], vec![0.5, 1.0]], m: vec![0.0; 2], w: vec![0.5; 2] },
        ),
        (
            "basic-cube-line.json".into(),
            InstanceFile::Geometry {
                body: BodySpec { kind: "lp".into(), p: Exponent::from_p(f64::INFINITY), dim: 2 },
                map: None,
                hyperplanes: vec![HyperplaneSpec { normal: vec![1.0, 0.0], offset: 0.0 }],
            },
        ),
    ];
    for n in 1..=6 {
        files.push((
            format!("sharp-n{n}.json"),
            InstanceFile::Geometry {
                body: BodySpec { kind: "lp".into(), p: Exponent::from_p(f64::INFINITY), dim: 2 },
                map: None,
                hyperplanes: (1..=n)
                    .map(|k| HyperplaneSpec {
                        normal: vec![1.0, 0.0],
                        offset: -1.0 + 2.0 * k as f64 / (n as f64 + 1.0),
                    })
                    .collect(),
            },
        ));
    }
    for i in 0..200 {
        let n = rng.random_range(2..=12);
        let spread = [0.5, 1.0, 2.0][i % 3];
        let w = if i % 2 == 0 { 1.0 / n as f64 } else { round4(0.9 / n as f64) };
        let inst =
            InstanceFile::Matrix { a: unit_diagonal(&mut rng, n, spread), m: midpoints(&mut rng, n), w: vec![w; n] };
        files.push((format!("equal-{i:03}-n{n}.json"), inst));
    }
    for i in 0..150 {
        let n = rng.random_range(2..=8);
        let total = [0.5, 0.8, 0.9, 0.95][i % 4];
        let inst = InstanceFile::Matrix {
            a: unit_diagonal(&mut rng, n, 1.0),
            m: midpoints(&mut rng, n),
            w: widths(&mut rng, n, total),
        };
        files.push((format!("general-{i:03}-n{n}.json"), inst));
    }
    while files.len() < 500 {
        let i = files.len();
        files.push((format!("geometry-{i:03}.json"), geometry(&mut rng)));
    }
    for (name, inst) in &files {
        inst.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        fs::write(dir.join(name), to_json(inst)).expect("write instance");
    }
    println!("wrote {} instances to {}", files.len(), dir.display());
}
