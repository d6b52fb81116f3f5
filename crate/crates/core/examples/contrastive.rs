//! Values of the three contrastive terms on small hand-made inputs, and
//! how the temperature sharpens them.
//!
//! ```text
//! cargo run --example contrastive
//! ```

use survstrat::losses::{ivcg, ivcw, iviw};
use survstrat::tensor::{Tape, Tensor};

fn main() {
    let tape = Tape::new();
    // a censored anchor, an uncensored positive in its cluster and a negative elsewhere
    let z = tape.constant(Tensor::from_rows(&[[1.0, 0.0], [2.0, 0.0], [0.0, 3.0]]).unwrap());
    let events = [false, true, true];
    let clusters = [0, 0, 1];

    // two views that agree exactly, and cluster distributions that are one-hot
    let views = tape.constant(Tensor::identity(2));

    println!("{:>6} {:>8} {:>8} {:>8}", "tau", "IVCG", "IVIW", "IVCW");
    for tau in [0.1, 0.5, 1.0, 2.0] {
        println!(
            "{tau:>6} {:>8.5} {:>8.5} {:>8.5}",
            ivcg(z, &events, &clusters, tau).unwrap().item(),
            iviw(views, views, tau).unwrap().item(),
            ivcw(views, views, tau).unwrap().item(),
        );
    }
}
