//! Trilinear spectral-measure closure and the commutator identity.
//!
//! ```bash
//! cargo run --release --example measure-check [config]
//! ```

use distorted_nls::cli::{measure_report, static_setup};
use distorted_nls::runstore::RunConfig;

fn main() -> distorted_nls::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => RunConfig::load(p.as_ref())?,
        None => RunConfig::default(),
    };
    let st = static_setup(&cfg)?;
    let rep = measure_report(&st, &cfg)?;
    println!("closure (singular + regular vs direct) {:.3e}", rep.closure.independent);
    println!(
        "commutator residual {:.3e} -> {:.3e} (order {:.2})",
        rep.commutator_coarse, rep.commutator_fine, rep.commutator_order
    );
    for (eps, e) in &rep.product_formula {
        println!("product formula {eps:?}: {e:.3e}");
    }
    Ok(())
}
