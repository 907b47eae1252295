//! Clusters the two-moons dataset with both `U` update rules.
//!
//! ```text
//! cargo run --release -p knet --example moons -- [N] [seed]
//! ```

use knet::data::{gen_moons, standardize, DEFAULT_MOON_NOISE, MOONS_SIGMA};
use knet::{fit, nmi, KNetConfig, SigmaMode, UUpdate};

fn main() -> knet::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let ds = gen_moons(n, DEFAULT_MOON_NOISE, seed)?;
    let (x, _) = standardize(ds.x.view())?;
    let truth = ds.labels.expect("generated data is labeled");
    for update in [UUpdate::Eig, UUpdate::Sma] {
        let config = KNetConfig {
            sigma: SigmaMode::Fixed(MOONS_SIGMA),
            u_update: update,
            seed,
            ..KNetConfig::new(2)
        };
        let model = fit(x.view(), &config)?;
        println!(
            "{update:?}: NMI {:.4}, {} outer iterations (converged: {}), prep {:.1}s, run {:.1}s",
            nmi(&truth, &model.labels)?,
            model.outer_iterations(),
            model.converged,
            model.timings.prep_seconds,
            model.timings.run_seconds
        );
    }
    Ok(())
}
