//! TSPLIB reading and writing for explicit full-matrix ATSP instances and
//! tour files.

use std::fmt::Write as _;

use super::TspError;

/// Scale applied to costs before rounding to integer TSPLIB weights.
pub const WEIGHT_SCALE: f64 = 1000.0;

/// Integer weight for a cost: `cost * 1000` rounded half to even.
pub fn weight(cost: f64) -> i64 {
    (cost * WEIGHT_SCALE).round_ties_even() as i64
}

/// Renders a full-matrix ATSP file. One matrix row per line.
pub fn write_atsp(name: &str, n: usize, cost: &[f64]) -> String {
    assert_eq!(cost.len(), n * n);
    let mut out = String::new();
    let _ = writeln!(out, "NAME: {name}");
    out.push_str("TYPE: ATSP\n");
    let _ = writeln!(out, "DIMENSION: {n}");
    out.push_str("EDGE_WEIGHT_TYPE: EXPLICIT\n");
    out.push_str("EDGE_WEIGHT_FORMAT: FULL_MATRIX\n");
    out.push_str("EDGE_WEIGHT_SECTION\n");
    for row in cost.chunks(n.max(1)).take(n) {
        let line: Vec<String> = row.iter().map(|&c| weight(c).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.push_str("EOF\n");
    out
}

/// Parses a full-matrix ATSP file into its dimension and integer weights.
pub fn parse_atsp(text: &str) -> Result<(usize, Vec<i64>), TspError> {
    let bad = |m: String| TspError::TsplibFormat(m);
    let mut dimension = None;
    let mut lines = text.lines();
    let mut in_weights = false;
    for line in lines.by_ref() {
        let line = line.trim();
        if line == "EDGE_WEIGHT_SECTION" {
            in_weights = true;
            break;
        }
        if let Some((key, value)) = line.split_once(':') {
            let (key, value) = (key.trim(), value.trim());
            match key {
                "TYPE" if value != "ATSP" => return Err(bad(format!("unsupported TYPE {value}"))),
                "EDGE_WEIGHT_TYPE" if value != "EXPLICIT" => {
                    return Err(bad(format!("unsupported EDGE_WEIGHT_TYPE {value}")))
                }
                "EDGE_WEIGHT_FORMAT" if value != "FULL_MATRIX" => {
                    return Err(bad(format!("unsupported EDGE_WEIGHT_FORMAT {value}")))
                }
                "DIMENSION" => {
                    dimension = Some(value.parse::<usize>().map_err(|e| bad(format!("DIMENSION: {e}")))?)
                }
                _ => {}
            }
        }
    }
    let n = dimension.ok_or_else(|| bad("missing DIMENSION".into()))?;
    if !in_weights {
        return Err(bad("missing EDGE_WEIGHT_SECTION".into()));
    }
    let mut weights = Vec::with_capacity(n * n);
    for tok in lines.take_while(|l| l.trim() != "EOF").flat_map(str::split_whitespace) {
        weights.push(tok.parse::<i64>().map_err(|e| bad(format!("weight {tok:?}: {e}")))?);
    }
    if weights.len() != n * n {
        return Err(bad(format!("expected {} weights, found {}", n * n, weights.len())));
    }
    Ok((n, weights))
}

/// Parses a TSPLIB tour file (1-based node ids, `-1` terminator) into 0-based
/// indices, checking that it visits each of `n` nodes exactly once.
pub fn parse_tour(text: &str, n: usize) -> Result<Vec<usize>, TspError> {
    let bad = |m: String| TspError::TsplibFormat(m);
    let mut lines = text.lines();
    if !lines.by_ref().any(|l| l.trim() == "TOUR_SECTION") {
        return Err(bad("missing TOUR_SECTION".into()));
    }
    let mut tour = Vec::with_capacity(n);
    'outer: for line in lines {
        for tok in line.split_whitespace() {
            let id: i64 = tok.parse().map_err(|e| bad(format!("tour entry {tok:?}: {e}")))?;
            if id == -1 {
                break 'outer;
            }
            if id < 1 || id as usize > n {
                return Err(bad(format!("tour node {id} out of range 1..={n}")));
            }
            tour.push(id as usize - 1);
        }
    }
    let mut seen = vec![false; n];
    for &i in &tour {
        if std::mem::replace(&mut seen[i], true) {
            return Err(bad(format!("tour visits node {} twice", i + 1)));
        }
    }
    if tour.len() != n {
        return Err(bad(format!("tour has {} nodes, expected {n}", tour.len())));
    }
    Ok(tour)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_node_file_layout() {
        let text = write_atsp("t", 2, &[0.0, 1.2345, 2.0, 0.0]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[2], "DIMENSION: 2");
        assert_eq!(lines[1], "TYPE: ATSP");
        assert_eq!(lines[8], "EOF");
    }

    #[test]
    fn weights_round_half_even() {
        // each product below lands exactly on .5 in f64
        assert_eq!(weight(1.2345), 1234);
        assert_eq!(weight(1.0005), 1000);
        assert_eq!(weight(0.0025), 2);
        assert_eq!(weight(0.0035), 4);
        assert_eq!(weight(0.1235), 124);
    }

    #[test]
    fn tour_parsing() {
        let text = "NAME: t\nTYPE: TOUR\nDIMENSION: 3\nTOUR_SECTION\n2\n3\n1\n-1\nEOF\n";
        assert_eq!(parse_tour(text, 3).unwrap(), [1, 2, 0]);
        assert!(parse_tour("TOUR_SECTION\n1\n1\n-1\n", 2).is_err());
        assert!(parse_tour("TOUR_SECTION\n1\n-1\n", 2).is_err());
        assert!(parse_tour("1\n2\n", 2).is_err());
    }

    #[test]
    fn rejects_symmetric_type() {
        assert!(parse_atsp("TYPE: TSP\nDIMENSION: 1\nEDGE_WEIGHT_SECTION\n0\nEOF\n").is_err());
    }

    proptest! {
        #[test]
        fn write_then_parse_recovers_weights(n in 1usize..7, seed in prop::collection::vec(0.0f64..5000.0, 49)) {
            let cost: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { seed[k] }).collect();
            let (m, w) = parse_atsp(&write_atsp("p", n, &cost)).unwrap();
            prop_assert_eq!(m, n);
            prop_assert_eq!(w, cost.iter().map(|&c| weight(c)).collect::<Vec<_>>());
        }
    }
}
