//! Runs a 30-session intervention with a simulated learner and summarizes
//! the convergence report.
//!
//! `cargo run --release --example simulate_intervention -- uneven 7`

use hhrl::config::InterventionConfig;
use hhrl::runner::run_intervention;

fn main() {
    let mut args = std::env::args().skip(1);
    let learner = args.next().unwrap_or_else(|| "mid".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let config = InterventionConfig::simulated(&learner, 30, seed);
    let run = run_intervention(&config, None).expect("simulation");
    let r = &run.report;
    println!("{learner} seed {seed}: {} challenge and {} feedback episodes", r.loc.episodes, r.lof.episodes);
    println!("challenge policy  {:?}", r.loc.final_policy);
    if let Some(o) = &r.oracle {
        println!("oracle policy     {:?}  agreement {:.1}", o.policy, o.agreement);
    }
    println!("feedback policy   {:?}", r.lof.final_policy);
    println!("challenge changes per window {:?}", r.loc.policy_changes);
    println!("stable after {:?} / {:?} episodes", r.loc.episodes_to_stability, r.lof.episodes_to_stability);
    if let Some(e) = &r.engagement {
        println!("engagement first {:.2} last {:.2}", e[0], e[e.len() - 1]);
    }
}
