//! Generator for stories in the single-supporting-fact line format.
//!
//! Useful for smoke tests and examples when the benchmark files are not
//! available locally. Each story has five blocks of two movement statements
//! followed by a "Where is X?" question about one of the two actors just moved.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

const ACTORS: [&str; 4] = ["Mary", "John", "Daniel", "Sandra"];
const PLACES: [&str; 6] = ["hallway", "bathroom", "kitchen", "office", "bedroom", "garden"];
const MOVES: [&str; 5] = ["moved to", "went to", "journeyed to", "travelled to", "went back to"];

/// Text of `stories` stories (five questions each), deterministic in `seed`.
pub fn single_supporting_fact(stories: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for _ in 0..stories {
        let mut location: [Option<(&str, usize)>; 4] = [None; 4];
        let mut line = 1;
        for _ in 0..5 {
            let mut moved = [0usize; 2];
            for slot in moved.iter_mut() {
                let actor = rng.gen_range(0..ACTORS.len());
                let place = *PLACES.choose(&mut rng).expect("non-empty");
                let verb = *MOVES.choose(&mut rng).expect("non-empty");
                let _ = writeln!(out, "{line} {} {verb} the {place}.", ACTORS[actor]);
                location[actor] = Some((place, line));
                *slot = actor;
                line += 1;
            }
            let asked = moved[rng.gen_range(0..2)];
            let (place, support) = location[asked].expect("actor just moved");
            let _ = writeln!(out, "{line} Where is {}? \t{place}\t{support}", ACTORS[asked]);
            line += 1;
        }
    }
    out
}

/// Writes `<root>/en/qa1_single-supporting-fact_{train,test}.txt` with
/// `stories` stories per split. The test split uses `seed + 1`.
pub fn write_task_root(root: &Path, stories: usize, seed: u64) -> Result<(PathBuf, PathBuf)> {
    let dir = root.join("en");
    fs::create_dir_all(&dir)?;
    let train = dir.join("qa1_single-supporting-fact_train.txt");
    let test = dir.join("qa1_single-supporting-fact_test.txt");
    fs::write(&train, single_supporting_fact(stories, seed))?;
    fs::write(&test, single_supporting_fact(stories, seed + 1))?;
    Ok((train, test))
}
