//! Best challenge level per game for each preset learner, by simulation and
//! by exact computation.

use hhrl::learner::{exact_optimal_loc, oracle_policy, preset, stationary_preset_names, DEFAULT_ORACLE_TRIALS};
use hhrl::model::{default_game_catalog, DEFAULT_MISTAKE_THRESHOLD};

fn main() {
    let catalog = default_game_catalog();
    for name in stationary_preset_names() {
        let p = preset(&name).unwrap();
        let mc = oracle_policy(&p, &catalog, DEFAULT_MISTAKE_THRESHOLD, DEFAULT_ORACLE_TRIALS, 1).unwrap();
        let sim: Vec<u8> = mc.iter().map(|r| r.best.value()).collect();
        let exact: Vec<u8> = (0..catalog.len()).map(|g| exact_optimal_loc(&p, g, DEFAULT_MISTAKE_THRESHOLD).value()).collect();
        println!("{name:>10}  simulated {sim:?}  exact {exact:?}");
    }
}
