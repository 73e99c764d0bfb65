//! The distribution CSV schema shared by `distribution`, `oracle`, and
//! `simulate`: semicolon-separated fields, composite fields comma-joined,
//! one header row.
//!
//! ```text
//! positions;species;probability[;stderr]
//! 0,1;2,1;1.353352832366127e-1
//! ```

use std::collections::BTreeMap;
use std::io::{self, Write};

use masep_core::state::MarkovState;

pub struct Row {
    pub state: MarkovState,
    pub probability: f64,
    pub stderr: Option<f64>,
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_rows<W: Write>(mut w: W, rows: &[Row], with_stderr: bool) -> io::Result<()> {
    if with_stderr {
        writeln!(w, "positions;species;probability;stderr")?;
    } else {
        writeln!(w, "positions;species;probability")?;
    }
    for row in rows {
        let positions = join(row.state.positions());
        let species = join(row.state.species().letters());
        match (with_stderr, row.stderr) {
            (true, Some(se)) => writeln!(w, "{};{};{:e};{:e}", positions, species, row.probability, se)?,
            (true, None) => writeln!(w, "{};{};{:e};", positions, species, row.probability)?,
            (false, _) => writeln!(w, "{};{};{:e}", positions, species, row.probability)?,
        }
    }
    Ok(())
}

pub type Key = (Vec<i64>, Vec<u32>);

/// Parses a distribution CSV back into a probability map (the optional
/// stderr column is ignored).
pub fn parse_distribution(text: &str) -> Result<BTreeMap<Key, f64>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty file")?;
    if !header.starts_with("positions;species;probability") {
        return Err(format!("unrecognized header: {}", header));
    }
    let mut out = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        let mut fields = line.split(';');
        let positions = fields
            .next()
            .ok_or_else(|| format!("line {}: missing positions", lineno + 2))?;
        let species = fields
            .next()
            .ok_or_else(|| format!("line {}: missing species", lineno + 2))?;
        let prob = fields
            .next()
            .ok_or_else(|| format!("line {}: missing probability", lineno + 2))?;
        let positions: Vec<i64> = positions
            .split(',')
            .map(|x| x.trim().parse().map_err(|e| format!("line {}: {}", lineno + 2, e)))
            .collect::<Result<_, _>>()?;
        let species: Vec<u32> = species
            .split(',')
            .map(|x| x.trim().parse().map_err(|e| format!("line {}: {}", lineno + 2, e)))
            .collect::<Result<_, _>>()?;
        let prob: f64 = prob
            .trim()
            .parse()
            .map_err(|e| format!("line {}: {}", lineno + 2, e))?;
        out.insert((positions, species), prob);
    }
    Ok(out)
}
