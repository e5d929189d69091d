//! Seeded synthetic datasets for tests, demos and offline runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;

/// Isotropic Gaussian clusters, `n_per_class` rows around each center.
pub fn gaussian_blobs(centers: &[Vec<f64>], std_dev: f64, n_per_class: usize, seed: u64) -> Dataset {
    assert!(!centers.is_empty(), "need at least one center");
    let dim = centers[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, std_dev).expect("finite std dev");
    let mut features = Vec::with_capacity(centers.len() * n_per_class);
    let mut labels = Vec::with_capacity(centers.len() * n_per_class);
    for _ in 0..n_per_class {
        for (class, c) in centers.iter().enumerate() {
            features.push(c.iter().map(|&m| m + noise.sample(&mut rng)).collect());
            labels.push(class);
        }
    }
    Dataset::new(
        features,
        labels,
        (0..dim).map(|i| format!("x{i}")).collect(),
        (0..centers.len()).map(|c| format!("c{c}")).collect(),
    )
    .expect("well-formed synthetic data")
}

/// Two well separated 2-D blobs.
pub fn separable_blobs(n_per_class: usize, seed: u64) -> Dataset {
    gaussian_blobs(&[vec![0.25, 0.3], vec![0.75, 0.7]], 0.07, n_per_class, seed)
}

// Per-class (mean, std) of the seven wheat-kernel measurements: area,
// perimeter, compactness, kernel length, kernel width, asymmetry, groove length.
const SEEDS_STATS: [[(f64, f64); 7]; 3] = [
    [
        (14.33, 1.22),
        (14.29, 0.58),
        (0.880, 0.016),
        (5.51, 0.23),
        (3.24, 0.18),
        (2.67, 1.17),
        (5.09, 0.26),
    ],
    [
        (18.33, 1.44),
        (16.14, 0.62),
        (0.884, 0.016),
        (6.15, 0.27),
        (3.68, 0.19),
        (3.64, 1.18),
        (6.02, 0.25),
    ],
    [
        (11.87, 0.72),
        (13.25, 0.34),
        (0.849, 0.022),
        (5.23, 0.14),
        (2.85, 0.15),
        (4.79, 1.34),
        (5.12, 0.16),
    ],
];

// Loading of each measurement on a shared per-kernel size factor.
const SIZE_LOADING: [f64; 7] = [0.95, 0.95, 0.45, 0.85, 0.85, 0.0, 0.75];

const SEEDS_FEATURES: [&str; 7] = [
    "area",
    "perimeter",
    "compactness",
    "kernel_length",
    "kernel_width",
    "asymmetry",
    "groove_length",
];

/// Stand-in for the 210-row, 7-feature, 3-class wheat seeds table when the
/// real file is not available. Class-conditional Gaussians with a shared size
/// factor, 70 rows per class.
pub fn seeds_surrogate(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut features = Vec::with_capacity(210);
    let mut labels = Vec::with_capacity(210);
    for _ in 0..70 {
        for (class, stats) in SEEDS_STATS.iter().enumerate() {
            let size: f64 = unit.sample(&mut rng);
            let row = stats
                .iter()
                .zip(SIZE_LOADING)
                .map(|(&(mean, sd), load)| {
                    let own: f64 = unit.sample(&mut rng);
                    mean + sd * (load * size + (1.0 - load * load).sqrt() * own)
                })
                .collect();
            features.push(row);
            labels.push(class);
        }
    }
    Dataset::new(
        features,
        labels,
        SEEDS_FEATURES.iter().map(|s| s.to_string()).collect(),
        vec!["kama".into(), "rosa".into(), "canadian".into()],
    )
    .expect("well-formed synthetic data")
}
