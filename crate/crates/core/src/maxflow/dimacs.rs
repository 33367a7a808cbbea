//! DIMACS max-flow text format: `c` comments, one `p max <nodes> <arcs>`
//! line, `n <id> s|t` terminal lines and `a <from> <to> <capacity>` arcs.
//! Node ids are 1-based.

use super::graph::FlowGraph;
use crate::error::{Error, Result};

pub fn parse_dimacs(text: &str) -> Result<FlowGraph> {
    let mut nodes: Option<usize> = None;
    let mut source = None;
    let mut sink = None;
    let mut arcs = Vec::new();

    let err = |line: usize, msg: String| Error::Format {
        offset: line as u64,
        reason: format!("dimacs line {line}: {msg}"),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut fields = raw.split_whitespace();
        let Some(tag) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        let num = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| err(line_no, format!("bad integer {s:?}")))
        };
        match tag {
            "c" => {}
            "p" => {
                if rest.len() != 3 || rest[0] != "max" {
                    return Err(err(line_no, "expected `p max <nodes> <arcs>`".into()));
                }
                nodes = Some(num(rest[1])?);
            }
            "n" => {
                if rest.len() != 2 {
                    return Err(err(line_no, "expected `n <id> s|t`".into()));
                }
                let id = num(rest[0])?;
                match rest[1] {
                    "s" => source = Some(id),
                    "t" => sink = Some(id),
                    other => return Err(err(line_no, format!("unknown terminal {other:?}"))),
                }
            }
            "a" => {
                if rest.len() != 3 {
                    return Err(err(line_no, "expected `a <from> <to> <cap>`".into()));
                }
                let cap: f64 = rest[2]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad capacity {:?}", rest[2])))?;
                arcs.push((num(rest[0])?, num(rest[1])?, cap, line_no));
            }
            other => return Err(err(line_no, format!("unknown line type {other:?}"))),
        }
    }

    let n = nodes.ok_or_else(|| err(0, "missing problem line".into()))?;
    let to_index = |id: usize, line: usize| {
        if id == 0 || id > n {
            Err(err(line, format!("node {id} outside 1..={n}")))
        } else {
            Ok(id - 1)
        }
    };
    let s = to_index(source.ok_or_else(|| err(0, "missing source".into()))?, 0)?;
    let t = to_index(sink.ok_or_else(|| err(0, "missing sink".into()))?, 0)?;
    let mut graph = FlowGraph::with_capacity(n, s, t, arcs.len());
    for (u, v, c, line) in arcs {
        graph.add_arc(to_index(u, line)?, to_index(v, line)?, c);
    }
    graph.validate()?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_network() {
        let text = "c example\np max 4 5\nn 1 s\nn 4 t\na 1 2 3\na 1 3 2\na 2 3 1\na 2 4 2\na 3 4 3\n";
        let g = parse_dimacs(text).unwrap();
        assert_eq!((g.node_count(), g.source(), g.sink()), (4, 0, 3));
        assert_eq!(g.arcs().len(), 5);
        assert_eq!(crate::maxflow::solve(&g).unwrap().flow, 5.0);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_dimacs("p max 2 1\nn 1 s\nn 2 t\na 1 3 1\n").is_err());
        assert!(parse_dimacs("p min 2 1\n").is_err());
        assert!(parse_dimacs("n 1 s\n").is_err());
        assert!(parse_dimacs("p max 2 1\nn 1 s\nn 2 t\na 1 2 -1\n").is_err());
    }
}
