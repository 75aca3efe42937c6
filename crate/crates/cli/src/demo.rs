//! Seeded 2D toy: two paired three-component Gaussian mixtures.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Component {
    mean: [f64; 2],
    scale: [f64; 2],
}

const SOURCE: [Component; 3] = [
    Component {
        mean: [-2.0, -1.0],
        scale: [0.4, 0.4],
    },
    Component {
        mean: [0.0, 2.0],
        scale: [0.4, 0.4],
    },
    Component {
        mean: [2.0, -1.0],
        scale: [0.4, 0.4],
    },
];

// Each source component is paired with a moved, reshaped target component.
const TARGET: [Component; 3] = [
    Component {
        mean: [1.5, 1.2],
        scale: [0.7, 0.2],
    },
    Component {
        mean: [3.6, 5.6],
        scale: [0.25, 0.6],
    },
    Component {
        mean: [5.8, 2.8],
        scale: [0.5, 0.3],
    },
];

/// `n` paired samples: source point `i` and target point `i` share their
/// component and their standard normal draw.
pub fn paired_mixtures(n: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut source = Array2::zeros((n, 2));
    let mut target = Array2::zeros((n, 2));
    for i in 0..n {
        let c = rng.random_range(0..SOURCE.len());
        for d in 0..2 {
            let z: f64 = rng.sample(StandardNormal);
            source[[i, d]] = SOURCE[c].mean[d] + SOURCE[c].scale[d] * z;
            target[[i, d]] = TARGET[c].mean[d] + TARGET[c].scale[d] * z;
        }
    }
    (source, target)
}
