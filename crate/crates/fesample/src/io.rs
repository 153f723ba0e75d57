//! File formats.
//!
//! Models travel in two shapes: a plain-text edge list (`i j w` per line,
//! 0-based, `i < j`, symmetric completion applied on load, `#` comments
//! allowed) and JSON (`{n, edges, fields}` for Ising,
//! `{n, r, terms: [{subset, coeff}]}` for higher-order fields).
//! Cut decompositions and max-entropy programs round-trip through their
//! serde JSON shapes (`{m, n, epsilon, cuts}` and `{n, constraints, gamma}`)
//! and are re-validated after deserialization. Estimates are written as CSV
//! with one row per repeat; floats use Rust's shortest round-trip `Display`,
//! so a rerun with the same seed reproduces the file byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::MaxEntProgram;
use crate::model::{IsingModel, Model, Mrf};
use crate::regularity::CutDecomposition;
use crate::sampler::SampleEstimate;

/// JSON shape of an Ising model: `{n, edges: [[i, j, w], …], fields: [h…]}`.
#[derive(Serialize, Deserialize)]
struct IsingJson {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    fields: Option<Vec<f64>>,
}

/// JSON shape of an MRF: `{n, r, terms: [{subset, coeff}, …]}`.
#[derive(Serialize, Deserialize)]
struct MrfJson {
    n: usize,
    r: usize,
    terms: Vec<MrfTermJson>,
}

#[derive(Serialize, Deserialize)]
struct MrfTermJson {
    subset: Vec<usize>,
    coeff: f64,
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn from_json<T: serde::de::DeserializeOwned>(src: &str, what: &str) -> Result<T> {
    serde_json::from_str(src).map_err(|e| Error::Parse(format!("{what} JSON: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = serde_json::to_string_pretty(value)?;
    out.push('\n');
    Ok(out)
}

/// Parse the edge-list text format. Vertices are 0-based, each line is
/// `i j w` with `i < j`, and `n` is inferred as one past the largest vertex
/// mentioned. Blank lines and `#` comments are skipped.
pub fn parse_edge_list(src: &str) -> Result<IsingModel> {
    let mut edges = Vec::new();
    let mut n = 0usize;
    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected `i j w`, got {:?}",
                lineno + 1,
                raw.trim()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Parse(format!("line {}: bad {what} {s:?}", lineno + 1)))
        };
        let i = parse(fields[0], "vertex")?;
        let j = parse(fields[1], "vertex")?;
        let w: f64 = fields[2].parse().map_err(|_| {
            Error::Parse(format!("line {}: bad weight {:?}", lineno + 1, fields[2]))
        })?;
        if i >= j {
            return Err(Error::Parse(format!(
                "line {}: edges must satisfy i < j, got ({i}, {j})",
                lineno + 1
            )));
        }
        n = n.max(j + 1);
        edges.push((i, j, w));
    }
    if edges.is_empty() {
        return Err(Error::Parse("edge list is empty".into()));
    }
    IsingModel::from_edges(n, &edges, None)
}

/// Render a model as edge-list text (upper triangle, nonzero entries only).
/// Fails if the model carries a nonzero field, which the format cannot store.
pub fn format_edge_list(model: &IsingModel) -> Result<String> {
    if model.field().iter().any(|&h| h != 0.0) {
        return Err(Error::Parse(
            "edge-list text cannot store external fields; use the JSON format".into(),
        ));
    }
    let mut out = String::new();
    let j = model.coupling();
    for a in 0..model.n() {
        for b in (a + 1)..model.n() {
            if j[(a, b)] != 0.0 {
                out.push_str(&format!("{a} {b} {}\n", j[(a, b)]));
            }
        }
    }
    Ok(out)
}

fn ising_from_json(src: &str) -> Result<IsingModel> {
    let raw: IsingJson = from_json(src, "Ising model")?;
    IsingModel::from_edges(raw.n, &raw.edges, raw.fields)
}

fn mrf_from_json(src: &str) -> Result<Mrf> {
    let raw: MrfJson = from_json(src, "MRF")?;
    Mrf::new(
        raw.n,
        raw.r,
        raw.terms.into_iter().map(|t| (t.subset, t.coeff)).collect(),
    )
}

/// Serialize a model to its JSON shape.
pub fn model_to_json(model: &Model) -> Result<String> {
    match model {
        Model::Ising(m) => {
            let j = m.coupling();
            let mut edges = Vec::new();
            for a in 0..m.n() {
                for b in (a + 1)..m.n() {
                    if j[(a, b)] != 0.0 {
                        edges.push((a, b, j[(a, b)]));
                    }
                }
            }
            to_json(&IsingJson {
                n: m.n(),
                edges,
                fields: Some(m.field().to_vec()),
            })
        }
        Model::Mrf(m) => to_json(&MrfJson {
            n: m.n(),
            r: m.r(),
            terms: m
                .terms()
                .iter()
                .map(|(subset, coeff)| MrfTermJson {
                    subset: subset.clone(),
                    coeff: *coeff,
                })
                .collect(),
        }),
    }
}

/// Parse a model from text, sniffing the format: JSON objects with a `terms`
/// key are MRFs, JSON objects with an `edges` key are Ising models, anything
/// else is tried as an edge list.
pub fn parse_model(src: &str) -> Result<Model> {
    if src.trim_start().starts_with('{') {
        let value: serde_json::Value = from_json(src, "model")?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("model JSON must be an object".into()))?;
        if obj.contains_key("terms") {
            Ok(Model::Mrf(mrf_from_json(src)?))
        } else if obj.contains_key("edges") {
            Ok(Model::Ising(ising_from_json(src)?))
        } else {
            Err(Error::Parse(
                "model JSON needs an `edges` or `terms` key".into(),
            ))
        }
    } else {
        Ok(Model::Ising(parse_edge_list(src)?))
    }
}

/// Load a model from a file (see [`parse_model`] for format sniffing).
pub fn read_model(path: &Path) -> Result<Model> {
    parse_model(&read_to_string(path)?)
}

/// Write a model as JSON.
pub fn write_model(path: &Path, model: &Model) -> Result<()> {
    write_string(path, &model_to_json(model)?)
}

/// Load and validate a cut decomposition from JSON.
pub fn read_decomposition(path: &Path) -> Result<CutDecomposition> {
    let decomp: CutDecomposition = from_json(&read_to_string(path)?, "decomposition")?;
    decomp.validate()?;
    Ok(decomp)
}

/// Write a cut decomposition as JSON.
pub fn write_decomposition(path: &Path, decomp: &CutDecomposition) -> Result<()> {
    write_string(path, &to_json(decomp)?)
}

/// Load and re-validate a max-entropy program from JSON.
pub fn read_program(path: &Path) -> Result<MaxEntProgram> {
    let raw: MaxEntProgram = from_json(&read_to_string(path)?, "program")?;
    MaxEntProgram::new(raw.n, raw.constraints, raw.gamma)
}

/// Write a max-entropy program as JSON.
pub fn write_program(path: &Path, program: &MaxEntProgram) -> Result<()> {
    write_string(path, &to_json(program)?)
}

/// Render an estimate as CSV with columns
/// `repeat,q,value,rescaled_value,median_flag`. The flag marks the central
/// order statistic(s) realizing the median: one row for an odd number of
/// successful repeats, two for an even number.
pub fn estimate_to_csv(estimate: &SampleEstimate) -> Result<String> {
    let mut order: Vec<usize> = (0..estimate.per_repeat.len()).collect();
    order.sort_by(|&a, &b| {
        f64::total_cmp(
            &estimate.per_repeat[a].rescaled,
            &estimate.per_repeat[b].rescaled,
        )
        .then(
            estimate.per_repeat[a]
                .repeat
                .cmp(&estimate.per_repeat[b].repeat),
        )
    });
    let mut flagged = vec![false; estimate.per_repeat.len()];
    if !order.is_empty() {
        let mid = order.len() / 2;
        if order.len() % 2 == 1 {
            flagged[order[mid]] = true;
        } else {
            flagged[order[mid - 1]] = true;
            flagged[order[mid]] = true;
        }
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["repeat", "q", "value", "rescaled_value", "median_flag"])?;
    for (idx, outcome) in estimate.per_repeat.iter().enumerate() {
        writer.write_record(&[
            outcome.repeat.to_string(),
            estimate.q.to_string(),
            outcome.value.to_string(),
            outcome.rescaled.to_string(),
            usize::from(flagged[idx]).to_string(),
        ])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Parse(format!("flushing CSV: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(format!("CSV is not UTF-8: {e}")))
}

/// Write an estimate as CSV (see [`estimate_to_csv`]).
pub fn write_estimate_csv(path: &Path, estimate: &SampleEstimate) -> Result<()> {
    write_string(path, &estimate_to_csv(estimate)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::RepeatOutcome;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn sample_ising() -> IsingModel {
        IsingModel::from_edges(3, &[(0, 1, 0.5), (1, 2, -0.25)], Some(vec![0.1, 0.0, -0.2]))
            .unwrap()
    }

    #[test]
    fn edge_list_round_trips_with_comments() {
        let src = "# triangle with a pendant\n0 1 0.5\n\n1 2 -0.25  # inline note\n0 3 1\n";
        let model = parse_edge_list(src).unwrap();
        assert_eq!(model.n(), 4);
        assert_relative_eq!(model.coupling()[(1, 0)], 0.5);
        assert_relative_eq!(model.coupling()[(2, 1)], -0.25);
        assert_relative_eq!(model.coupling()[(3, 0)], 1.0);
        let text = format_edge_list(&model).unwrap();
        assert_eq!(parse_edge_list(&text).unwrap(), model);
    }

    #[test]
    fn edge_list_rejects_malformed_lines() {
        assert!(parse_edge_list("0 1\n").is_err());
        assert!(parse_edge_list("1 0 0.5\n").is_err());
        assert!(parse_edge_list("0 0 0.5\n").is_err());
        assert!(parse_edge_list("0 1 spam\n").is_err());
        assert!(parse_edge_list("0 1 0.5\n0 1 0.25\n").is_err());
        assert!(parse_edge_list("# nothing\n").is_err());
    }

    #[test]
    fn edge_list_cannot_store_fields() {
        assert!(format_edge_list(&sample_ising()).is_err());
    }

    #[test]
    fn ising_json_round_trips() {
        let model = Model::Ising(sample_ising());
        let json = model_to_json(&model).unwrap();
        assert_eq!(parse_model(&json).unwrap(), model);
        // The documented shape parses too, with fields optional.
        let by_hand = r#"{"n": 2, "edges": [[0, 1, 0.75]]}"#;
        let parsed = parse_model(by_hand).unwrap();
        assert_eq!(parsed.n(), 2);
        match parsed {
            Model::Ising(m) => {
                assert_relative_eq!(m.coupling()[(0, 1)], 0.75);
                assert_eq!(m.field(), &ndarray::Array1::<f64>::zeros(2));
            }
            Model::Mrf(_) => panic!("expected an Ising model"),
        }
    }

    #[test]
    fn mrf_json_round_trips() {
        let mrf = Mrf::new(
            4,
            3,
            vec![(vec![0, 1, 2], 0.3), (vec![1, 3], -0.5), (vec![2], 1.0)],
        )
        .unwrap();
        let model = Model::Mrf(mrf);
        let json = model_to_json(&model).unwrap();
        assert_eq!(parse_model(&json).unwrap(), model);
    }

    #[test]
    fn model_sniffing_rejects_unknown_json() {
        assert!(parse_model(r#"{"n": 3}"#).is_err());
        assert!(parse_model("[1, 2, 3]").is_err());
    }

    #[test]
    fn files_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let model_path = dir.path().join("model.json");
        let model = Model::Ising(sample_ising());
        write_model(&model_path, &model).unwrap();
        assert_eq!(read_model(&model_path).unwrap(), model);

        let decomp = crate::regularity::fk_decompose(
            &array![[0.0, 1.0], [1.0, 0.0]],
            0.5,
            &crate::regularity::FkConfig::default(),
            7,
        )
        .unwrap();
        let decomp_path = dir.path().join("cuts.json");
        write_decomposition(&decomp_path, &decomp).unwrap();
        assert_eq!(read_decomposition(&decomp_path).unwrap(), decomp);

        let program = MaxEntProgram::new(
            2,
            vec![crate::maxent::Constraint {
                a: vec![1.0, 1.0],
                b: 1.5,
            }],
            0.25,
        )
        .unwrap();
        let program_path = dir.path().join("program.json");
        write_program(&program_path, &program).unwrap();
        assert_eq!(read_program(&program_path).unwrap(), program);
    }

    #[test]
    fn invalid_decomposition_json_is_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cuts.json");
        // Column index out of range for n = 2.
        std::fs::write(
            &path,
            r#"{"m": 2, "n": 2, "epsilon": 0.5, "cuts": [{"rows": [0], "cols": [5], "d": 1.0}]}"#,
        )
        .unwrap();
        assert!(read_decomposition(&path).is_err());
    }

    fn fake_estimate(rescaled: &[f64]) -> SampleEstimate {
        SampleEstimate {
            n: 6,
            q: 3,
            scale: 2.0,
            estimate: crate::sampler::median(rescaled).unwrap(),
            per_repeat: rescaled
                .iter()
                .enumerate()
                .map(|(repeat, &r)| RepeatOutcome {
                    repeat,
                    subset: vec![0, 1, 2],
                    value: r / 2.0,
                    rescaled: r,
                })
                .collect(),
            failures: Vec::new(),
            error_envelope: 0.0,
            omega: 0.0,
        }
    }

    #[test]
    fn estimate_csv_flags_the_median_row() {
        let csv = estimate_to_csv(&fake_estimate(&[3.0, 1.0, 2.0])).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "repeat,q,value,rescaled_value,median_flag");
        assert_eq!(lines[1], "0,3,1.5,3,0");
        assert_eq!(lines[2], "1,3,0.5,1,0");
        assert_eq!(lines[3], "2,3,1,2,1");
    }

    #[test]
    fn estimate_csv_flags_both_central_rows_when_even() {
        let csv = estimate_to_csv(&fake_estimate(&[4.0, 1.0, 3.0, 2.0])).unwrap();
        let flags: Vec<&str> = csv
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap())
            .collect();
        assert_eq!(flags, vec!["0", "0", "1", "1"]);
    }

    #[test]
    fn csv_floats_survive_a_round_trip() {
        let values = [std::f64::consts::PI, f64::MIN_POSITIVE, -1.0 / 3.0];
        let csv = estimate_to_csv(&fake_estimate(&values)).unwrap();
        for (line, &expected) in csv.lines().skip(1).zip(values.iter()) {
            let cell = line.split(',').nth(3).unwrap();
            assert_eq!(cell.parse::<f64>().unwrap(), expected);
        }
    }

    #[test]
    fn json_writer_emits_trailing_newline() {
        // Keeps files diff-friendly and byte-stable under rewrite.
        let json = model_to_json(&Model::Ising(sample_ising())).unwrap();
        assert!(json.ends_with('\n'));
        assert!(!json.ends_with("\n\n"));
    }

    #[test]
    fn unknown_paths_error_cleanly() {
        assert!(read_model(Path::new("/nonexistent/model.json")).is_err());
    }
}
