//! Line-oriented text snapshots.
//!
//! ```text
//! version 1
//! mode explicit
//! param gamma 0.2
//! ...
//! G <count> <sum>
//! U <id> <count> <sum> <type>:<amount> ...
//! V <id> <count> <sum> <type>:<amount> ...
//! R <user id> <item id> <value>
//! end <users> <items> <ratings>
//! ```
//!
//! Floats are written with the shortest representation that parses back to
//! the same bits. `R` lines hold the observed rating matrix and the `end`
//! line makes truncation detectable.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{
    EntityId, EntityState, Feedback, GlobalStats, Model, ModelParams, Seeding,
};
use crate::pheromone::{PheromoneType, PheromoneVector};

pub const SNAPSHOT_VERSION: u32 = 1;

fn defect(line: usize, reason: impl std::fmt::Display) -> Error {
    Error::Snapshot(format!("line {line}: {reason}"))
}

fn check_id(id: &EntityId) -> Result<()> {
    let s = id.as_str();
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::Snapshot(format!(
            "id `{s}` is empty or contains whitespace and cannot be saved"
        )));
    }
    Ok(())
}

pub fn write_model<W: Write>(model: &Model, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    let p = model.params();
    writeln!(w, "version {SNAPSHOT_VERSION}")?;
    writeln!(w, "mode {}", model.feedback().as_str())?;
    writeln!(w, "param gamma {}", p.gamma)?;
    writeln!(w, "param lambda {}", p.lambda)?;
    writeln!(w, "param sigma {}", p.sigma)?;
    match p.seeding {
        Seeding::Unique => writeln!(w, "param cluster_count unique")?,
        Seeding::Clustered { clusters } => writeln!(w, "param cluster_count {clusters}")?,
    }
    writeln!(w, "param neighborhood_size {}", p.neighborhood_size)?;
    writeln!(w, "param top_n {}", p.top_n)?;
    writeln!(w, "param rating_min {}", p.rating_min)?;
    writeln!(w, "param rating_max {}", p.rating_max)?;
    match p.type_cap {
        None => writeln!(w, "param type_cap none")?,
        Some(k) => writeln!(w, "param type_cap {k}")?,
    }
    writeln!(w, "param signed_weighting {}", p.signed_weighting)?;
    let g = model.stats();
    writeln!(w, "G {} {}", g.total_count, g.total_sum)?;
    for (tag, table) in [("U", model.users()), ("V", model.items())] {
        for (id, st) in table.iter() {
            check_id(id)?;
            write!(w, "{tag} {id} {} {}", st.rating_count, st.rating_sum)?;
            for (t, a) in st.pheromones.iter() {
                write!(w, " {t}:{a}")?;
            }
            writeln!(w)?;
        }
    }
    let mut ratings = 0usize;
    for u in 0..model.users().len() {
        let mut row: Vec<(&u32, &f64)> = model.rated_items(u).iter().collect();
        row.sort_unstable_by_key(|(i, _)| **i);
        for (&i, v) in row {
            writeln!(w, "R {} {} {v}", model.users().id(u), model.items().id(i as usize))?;
            ratings += 1;
        }
    }
    writeln!(
        w,
        "end {} {} {ratings}",
        model.users().len(),
        model.items().len()
    )?;
    w.flush()?;
    Ok(())
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    write_model(model, File::create(path)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    read_model(BufReader::new(File::open(path)?))
}

fn parse<T: FromStr>(line: usize, what: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| defect(line, format!("bad {what} `{s}`")))
}

fn parse_params(lines: &[(usize, String)]) -> Result<ModelParams> {
    let mut p = ModelParams::default();
    let mut seen = Vec::new();
    for (n, line) in lines {
        let n = *n;
        let mut parts = line.split(' ');
        let (Some("param"), Some(name), Some(value), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(defect(n, "malformed param line"));
        };
        if seen.contains(&name) {
            return Err(defect(n, format!("duplicate param `{name}`")));
        }
        seen.push(name);
        match name {
            "gamma" => p.gamma = parse(n, name, value)?,
            "lambda" => p.lambda = parse(n, name, value)?,
            "sigma" => p.sigma = parse(n, name, value)?,
            "cluster_count" => {
                p.seeding = match value {
                    "unique" => Seeding::Unique,
                    k => Seeding::Clustered {
                        clusters: parse(n, name, k)?,
                    },
                }
            }
            "neighborhood_size" => p.neighborhood_size = parse(n, name, value)?,
            "top_n" => p.top_n = parse(n, name, value)?,
            "rating_min" => p.rating_min = parse(n, name, value)?,
            "rating_max" => p.rating_max = parse(n, name, value)?,
            "type_cap" => {
                p.type_cap = match value {
                    "none" => None,
                    k => Some(parse(n, name, k)?),
                }
            }
            "signed_weighting" => p.signed_weighting = parse(n, name, value)?,
            _ => return Err(defect(n, format!("unknown param `{name}`"))),
        }
    }
    const ALL: [&str; 10] = [
        "gamma",
        "lambda",
        "sigma",
        "cluster_count",
        "neighborhood_size",
        "top_n",
        "rating_min",
        "rating_max",
        "type_cap",
        "signed_weighting",
    ];
    if let Some(missing) = ALL.iter().find(|name| !seen.contains(name)) {
        return Err(Error::Snapshot(format!("missing param `{missing}`")));
    }
    Ok(p)
}

fn parse_entity(n: usize, fields: &[&str]) -> Result<(EntityId, EntityState)> {
    let [id, count, sum, amounts @ ..] = fields else {
        return Err(defect(n, "entity line needs an id, a count and a sum"));
    };
    let mut entries = Vec::with_capacity(amounts.len());
    for pair in amounts {
        let (t, a) = pair
            .split_once(':')
            .ok_or_else(|| defect(n, format!("bad pheromone entry `{pair}`")))?;
        let t: u32 = parse(n, "pheromone type", t)?;
        let a: f64 = parse(n, "pheromone amount", a)?;
        if !a.is_finite() || a == 0.0 {
            return Err(defect(n, format!("pheromone amount {a} must be finite and non-zero")));
        }
        if entries.last().is_some_and(|&(prev, _): &(PheromoneType, f64)| prev.0 >= t) {
            return Err(defect(n, "pheromone types must be strictly ascending"));
        }
        entries.push((PheromoneType(t), a));
    }
    Ok((
        EntityId::new(*id),
        EntityState {
            pheromones: PheromoneVector::from_entries(entries),
            rating_count: parse(n, "count", count)?,
            rating_sum: parse(n, "sum", sum)?,
        },
    ))
}

pub fn read_model<R: BufRead>(input: R) -> Result<Model> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some(l) => Ok(l?),
            None => Err(Error::Snapshot(format!("truncated file: expected {what}"))),
        }
    };

    let (n, line) = next("version line")?;
    let version = line
        .strip_prefix("version ")
        .ok_or_else(|| defect(n, "missing version header"))?;
    if version != SNAPSHOT_VERSION.to_string() {
        return Err(defect(
            n,
            format!("unsupported version `{version}` (expected {SNAPSHOT_VERSION})"),
        ));
    }
    let (n, line) = next("mode line")?;
    let feedback = match line.as_str() {
        "mode explicit" => Feedback::Explicit,
        "mode implicit" => Feedback::Implicit,
        _ => return Err(defect(n, format!("bad mode line `{line}`"))),
    };

    let mut param_lines = Vec::new();
    let (n, g_line) = loop {
        let (n, line) = next("global stats line")?;
        if line.starts_with("param ") {
            param_lines.push((n, line));
        } else {
            break (n, line);
        }
    };
    let params = parse_params(&param_lines)?;
    let mut model = Model::empty(params, feedback)?;
    let g: Vec<&str> = g_line.split(' ').collect();
    let ["G", count, sum] = g[..] else {
        return Err(defect(n, "expected `G <count> <sum>`"));
    };
    model.stats = GlobalStats {
        total_count: parse(n, "count", count)?,
        total_sum: parse(n, "sum", sum)?,
    };

    let mut ratings = 0usize;
    loop {
        let (n, line) = next("`end` line")?;
        let fields: Vec<&str> = line.split(' ').collect();
        match fields[0] {
            "U" | "V" => {
                let (id, state) = parse_entity(n, &fields[1..])?;
                let (kind, table) = if fields[0] == "U" {
                    ("user", &mut model.users)
                } else {
                    ("item", &mut model.items)
                };
                table
                    .insert(kind, id, state)
                    .map_err(|e| defect(n, format!("duplicate entity line: {e}")))?;
                if kind == "user" {
                    model.ratings.push(HashMap::new());
                }
            }
            "R" => {
                let [_, user, item, value] = fields[..] else {
                    return Err(defect(n, "expected `R <user> <item> <value>`"));
                };
                let u = model
                    .users
                    .index_of(&EntityId::new(user))
                    .ok_or_else(|| defect(n, format!("rating for unknown user `{user}`")))?;
                let i = model
                    .items
                    .index_of(&EntityId::new(item))
                    .ok_or_else(|| defect(n, format!("rating for unknown item `{item}`")))?;
                let v: f64 = parse(n, "rating", value)?;
                if model.ratings[u].insert(i as u32, v).is_some() {
                    return Err(defect(n, format!("duplicate rating line ({user}, {item})")));
                }
                ratings += 1;
            }
            "end" => {
                let [_, users, items, count] = fields[..] else {
                    return Err(defect(n, "expected `end <users> <items> <ratings>`"));
                };
                let expected: (usize, usize, usize) = (
                    parse(n, "user count", users)?,
                    parse(n, "item count", items)?,
                    parse(n, "rating count", count)?,
                );
                let got = (model.users.len(), model.items.len(), ratings);
                if expected != got {
                    return Err(defect(
                        n,
                        format!("truncated file: trailer announces {expected:?} users/items/ratings, read {got:?}"),
                    ));
                }
                break;
            }
            other => return Err(defect(n, format!("unknown record `{other}`"))),
        }
    }
    if let Some(extra) = lines.next() {
        let (n, _) = extra?;
        return Err(defect(n, "content after the `end` line"));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RatingEvent;
    use crate::training::{init_acf, train_stream};

    fn round_trip(model: &Model) -> Model {
        let mut buf = Vec::new();
        write_model(model, &mut buf).unwrap();
        read_model(buf.as_slice()).unwrap()
    }

    fn text(model: &Model) -> String {
        let mut buf = Vec::new();
        write_model(model, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    fn trained() -> Model {
        let mut m = init_acf(&["a".into(), "b".into()], &[], ModelParams::acf(), Feedback::Explicit).unwrap();
        let events: Vec<_> = (0..100)
            .map(|i| RatingEvent::explicit(format!("u{}", i % 9), format!("i{}", i % 13), 1.0 + (i % 5) as f64, i))
            .collect();
        train_stream(&mut m, &events).unwrap();
        m
    }

    #[test]
    fn fresh_and_trained_models_round_trip() {
        let fresh = init_acf(&["a".into(), "b".into()], &[], ModelParams::acf(), Feedback::Implicit).unwrap();
        assert_eq!(round_trip(&fresh), fresh);
        let m = trained();
        let back = round_trip(&m);
        assert_eq!(back, m);
        for (x, y) in m.users().states().iter().zip(back.users().states()) {
            for ((_, a), (_, b)) in x.pheromones.iter().zip(y.pheromones.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn header_layout() {
        let t = text(&trained());
        let head: Vec<&str> = t.lines().take(3).collect();
        assert_eq!(head, ["version 1", "mode explicit", "param gamma 0.2"]);
        assert!(t.contains("\nparam cluster_count unique\n"));
        assert!(t.contains("\nU a 0 0 0:1\n"));
        assert!(t.trim_end().lines().last().unwrap().starts_with("end "));
    }

    #[test]
    fn rejects_unknown_version() {
        let t = text(&trained()).replacen("version 1", "version 7", 1);
        let e = read_model(t.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("unsupported version"), "{e}");
    }

    #[test]
    fn rejects_truncation() {
        let t = text(&trained());
        for keep in [1, 5, t.lines().count() - 1, t.lines().count() / 2] {
            let cut: String = t.lines().take(keep).map(|l| format!("{l}\n")).collect();
            let e = read_model(cut.as_bytes()).unwrap_err();
            assert!(e.to_string().contains("truncated"), "{keep}: {e}");
        }
    }

    #[test]
    fn rejects_duplicate_entities() {
        let t = text(&trained());
        let u_line = t.lines().find(|l| l.starts_with("U ")).unwrap().to_string();
        let dup = t.replacen(&u_line, &format!("{u_line}\n{u_line}"), 1);
        let e = read_model(dup.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("duplicate entity line"), "{e}");
    }

    #[test]
    fn rejects_ids_with_whitespace() {
        let m = init_acf(&["has space".into()], &[], ModelParams::acf(), Feedback::Implicit).unwrap();
        assert!(write_model(&m, Vec::new()).is_err());
    }

    #[test]
    fn negative_zero_sums_survive() {
        let mut m = trained();
        m.stats.total_sum = -0.0;
        assert_eq!(round_trip(&m).stats().total_sum.to_bits(), (-0.0f64).to_bits());
    }
}
