//! Bundled example models, parsed on demand.

use crate::parser::{parse, ModelSet};

pub const INTRO: &str = include_str!("../fixtures/intro.cmf");
pub const VIRAL: &str = include_str!("../fixtures/viral.cmf");
pub const CYCLIC: &str = include_str!("../fixtures/cyclic.cmf");
pub const CASCADE: &str = include_str!("../fixtures/cascade.cmf");
pub const DOWNSTREAM: &str = include_str!("../fixtures/downstream.cmf");
pub const BROKEN: &str = include_str!("../fixtures/broken.cmf");

/// `(file name, source)` for every bundled fixture.
pub const ALL: [(&str, &str); 6] = [
    ("intro.cmf", INTRO),
    ("viral.cmf", VIRAL),
    ("cyclic.cmf", CYCLIC),
    ("cascade.cmf", CASCADE),
    ("downstream.cmf", DOWNSTREAM),
    ("broken.cmf", BROKEN),
];

/// Parses a bundled fixture. Panics on a parse error, which would be a bug.
pub fn load(source: &str) -> ModelSet {
    parse(source).unwrap_or_else(|e| panic!("bundled fixture does not parse: {e}"))
}

pub fn intro() -> ModelSet {
    load(INTRO)
}

pub fn viral() -> ModelSet {
    load(VIRAL)
}

pub fn cyclic() -> ModelSet {
    load(CYCLIC)
}

pub fn cascade() -> ModelSet {
    load(CASCADE)
}

pub fn downstream() -> ModelSet {
    load(DOWNSTREAM)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::to_cmf;

    #[test]
    fn all_fixtures_parse_and_round_trip() {
        for (file, src) in ALL {
            let set = parse(src).unwrap_or_else(|e| panic!("{file}: {e}"));
            assert_eq!(parse(&to_cmf(&set)).unwrap(), set, "{file}");
        }
    }
}
