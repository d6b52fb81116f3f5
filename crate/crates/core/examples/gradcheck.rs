//! Compares tape gradients of the inter-view contrastive loss against
//! central finite differences.
//!
//! ```text
//! cargo run --example gradcheck
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use survstrat::losses;
use survstrat::tensor::{Tape, Tensor};

const STEP: f64 = 1e-5;

fn loss(z1: &Tensor, z2: &Tensor) -> f64 {
    let tape = Tape::new();
    losses::iviw(tape.constant(z1.clone()), tape.constant(z2.clone()), 0.5)
        .unwrap()
        .item()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut draw = |r, c| {
        let v: Vec<f64> = (0..r * c).map(|_| StandardNormal.sample(&mut rng)).collect();
        Tensor::new(r, c, v).unwrap()
    };
    let (z1, z2) = (draw(6, 4), draw(6, 4));

    let tape = Tape::new();
    let (a, b) = (tape.variable(z1.clone()), tape.variable(z2.clone()));
    let grads = tape.backward(losses::iviw(a, b, 0.5).unwrap()).unwrap();
    let analytic = grads.wrt(a);

    let mut numeric = Tensor::zeros(6, 4);
    for i in 0..z1.data().len() {
        let (mut up, mut down) = (z1.clone(), z1.clone());
        up.data_mut()[i] += STEP;
        down.data_mut()[i] -= STEP;
        numeric.data_mut()[i] = (loss(&up, &z2) - loss(&down, &z2)) / (2.0 * STEP);
    }

    let norm = |t: &Tensor| t.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.data().iter().zip(numeric.data()).map(|(x, y)| x - y).collect();
    let err = norm(&Tensor::new(6, 4, diff).unwrap()) / norm(&analytic).max(norm(&numeric));
    println!("dL/dz1 relative error: {err:.3e}");
    for (row_a, row_n) in analytic.iter_rows().zip(numeric.iter_rows()).take(2) {
        println!("  tape {row_a:.6?}\n  fd   {row_n:.6?}");
    }
}
