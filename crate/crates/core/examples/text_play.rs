//! Plays a scripted console session. Swap the cursor for stdin to play by hand
//! (or use `hhrl play`).

use std::io::Cursor;

use hhrl::config::EngineConfig;
use hhrl::textplay::play_session;

fn main() {
    let answers = "help\n7\n".repeat(15) + "quit\n";
    let summary = play_session(&EngineConfig::default(), 3, Cursor::new(answers), std::io::stdout(), None).unwrap();
    println!("{summary:?}");
}
