//! Writes an event log, reads it back, and rebuilds the tables from it.

use hhrl::config::InterventionConfig;
use hhrl::runner::log::read_records;
use hhrl::runner::{replay, run_intervention};

fn main() {
    let mut sink = Vec::new();
    let run = run_intervention(&InterventionConfig::simulated("high", 5, 3), Some(&mut sink)).unwrap();
    println!("{} records, {} bytes", run.records.len(), sink.len());
    for line in sink.split(|&b| b == b'\n').take(3) {
        let s = String::from_utf8_lossy(line);
        println!("  {}", &s[..s.len().min(140)]);
    }
    let records = read_records(sink.as_slice()).unwrap();
    let r = replay(&records).unwrap();
    assert_eq!(r.loc_table, run.loc_table);
    assert_eq!(r.lof_table, run.lof_table);
    println!("replayed tables match");

    let mut broken = records.clone();
    broken.remove(10);
    println!("with a record dropped: {}", replay(&broken).unwrap_err());
}
