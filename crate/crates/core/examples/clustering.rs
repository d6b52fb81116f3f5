//! Fits the three clustering back-ends to synthetic latent blobs and
//! prints sizes, SSE and Student's-t soft assignments.
//!
//! ```text
//! cargo run --example clustering
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use survstrat::clustering::{fit, soft_assign, within_cluster_sse};
use survstrat::config::ClusteringAlgorithm;
use survstrat::tensor::Tensor;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.6).unwrap();
    let centers = [[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]];
    let mut rows = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..40 + 20 * c {
            rows.push([center[0] + noise.sample(&mut rng), center[1] + noise.sample(&mut rng)]);
        }
    }
    let z = Tensor::from_rows(&rows).unwrap();

    for algorithm in [ClusteringAlgorithm::Kmeans, ClusteringAlgorithm::Gmm, ClusteringAlgorithm::Agglomerative] {
        let m = fit(algorithm, &z, 3, 0).unwrap();
        println!(
            "{algorithm:?}: sizes {:?}, SSE {:.2}",
            m.sizes(),
            within_cluster_sse(&z, &m.centers, &m.assignments)
        );
    }

    let m = fit(ClusteringAlgorithm::Kmeans, &z, 3, 0).unwrap();
    let q = soft_assign(&z, &m.centers, 1.0).unwrap();
    println!("soft assignments of the first three points:");
    for i in 0..3 {
        println!("  {:.3?}", q.row(i));
    }
}
