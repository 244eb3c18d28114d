//! Text artifacts: data CSV, spec sidecar, block, edge-list, covariance,
//! pre-estimate, timing and discretization tables.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::evaluate::EdgeConfidence;
use crate::graphs::Cpdag;
use crate::model::{BlockCovariance, MixedDataset, VariableKind, VariableSpec};
use crate::pipeline::StageTiming;
use crate::preestimate::PreEstimate;
use crate::preprocess::{ColumnReport, Decision};

pub const UNIT_ID_HEADER: &str = "unit_id";

/// Shortest-form rendering with 9 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let fixed = format!("{:.*}", (8 - exp).max(0) as usize, v);
        trim_zeros(&fixed)
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Numeric table read from CSV: optional leading `unit_id` column, header row.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub unit_ids: Vec<String>,
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

pub fn read_numeric_csv(path: &Path) -> Result<NumericTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_err(path, 1, e.to_string()))?,
        None => return Err(parse_err(path, 1, "missing header row")),
    };
    let header: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let has_ids = header.first().is_some_and(|h| h == UNIT_ID_HEADER);
    let names: Vec<String> = header[usize::from(has_ids)..].to_vec();
    if names.is_empty() {
        return Err(parse_err(path, 1, "no data columns"));
    }
    let mut seen = HashMap::new();
    for name in &names {
        if name.is_empty() {
            return Err(parse_err(path, 1, "empty column name"));
        }
        if seen.insert(name.clone(), ()).is_some() {
            return Err(parse_err(path, 1, format!("duplicate column `{name}`")));
        }
    }
    let mut unit_ids = Vec::new();
    let mut cells = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(parse_err(path, line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let mut fields = rec.iter();
        unit_ids.push(if has_ids { fields.next().expect("id field").trim().to_string() } else { format!("u{}", unit_ids.len() + 1) });
        for (c, f) in fields.enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("non-numeric value `{f}` in column `{}`", names[c])))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("non-finite value in column `{}`", names[c])));
            }
            cells.push(v);
        }
    }
    if unit_ids.is_empty() {
        return Err(parse_err(path, 2, "no data rows"));
    }
    let values = DMatrix::from_row_slice(unit_ids.len(), names.len(), &cells);
    Ok(NumericTable { unit_ids, names, values })
}

pub fn write_data_csv(path: &Path, x: &MixedDataset) -> Result<()> {
    let mut s = String::from(UNIT_ID_HEADER);
    for name in x.names() {
        s.push(',');
        s.push_str(&name);
    }
    s.push('\n');
    for i in 0..x.n() {
        s.push_str(&x.unit_ids()[i]);
        for j in 0..x.p() {
            s.push(',');
            if x.specs()[j].is_discrete() {
                write!(s, "{}", x.level(i, j)).expect("string write");
            } else {
                s.push_str(&fmt_f64(x.values()[(i, j)]));
            }
        }
        s.push('\n');
    }
    write_text(path, &s)
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

pub fn write_specs_tsv(path: &Path, specs: &[VariableSpec]) -> Result<()> {
    let mut s = String::from("name\tkind\tlevels\tthresholds\n");
    for sp in specs {
        let (kind, levels) = match sp.kind {
            VariableKind::Continuous => ("continuous", "-".to_string()),
            VariableKind::Discrete { levels } => ("discrete", levels.to_string()),
        };
        let t = sp.thresholds.as_deref().map_or("-".to_string(), join_floats);
        writeln!(s, "{}\t{kind}\t{levels}\t{t}", sp.name).expect("string write");
    }
    write_text(path, &s)
}

fn tsv_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l.split('\t').map(str::trim).collect()))
}

pub fn read_specs_tsv(path: &Path) -> Result<Vec<VariableSpec>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line, f) in tsv_lines(&text) {
        if line == 1 && f.first() == Some(&"name") {
            continue;
        }
        if f.len() != 4 {
            return Err(parse_err(path, line, format!("expected 4 fields, found {}", f.len())));
        }
        let spec = match f[1] {
            "continuous" => VariableSpec::continuous(f[0]),
            "discrete" => {
                let levels: usize = f[2].parse().map_err(|_| parse_err(path, line, format!("bad level count `{}`", f[2])))?;
                if f[3] == "-" {
                    VariableSpec::discrete(f[0], levels)
                } else {
                    let t: Vec<f64> = f[3]
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| parse_err(path, line, format!("bad thresholds `{}`", f[3])))?;
                    if t.len() + 1 != levels {
                        return Err(parse_err(path, line, "threshold count does not match levels"));
                    }
                    VariableSpec::with_thresholds(f[0], t).map_err(|e| parse_err(path, line, e.to_string()))?
                }
            }
            other => return Err(parse_err(path, line, format!("unknown kind `{other}`"))),
        };
        out.push(spec);
    }
    Ok(out)
}

/// Dataset from a data CSV and its spec sidecar (columns matched by name).
pub fn read_dataset(data: &Path, specs: &Path) -> Result<MixedDataset> {
    let table = read_numeric_csv(data)?;
    let specs = read_specs_tsv(specs)?;
    let by_name: HashMap<&str, &VariableSpec> = specs.iter().map(|s| (s.name.as_str(), s)).collect();
    let ordered: Vec<VariableSpec> = table
        .names
        .iter()
        .map(|n| by_name.get(n.as_str()).map(|s| (*s).clone()).ok_or_else(|| Error::Input(format!("no spec for column `{n}`"))))
        .collect::<Result<_>>()?;
    if ordered.len() != specs.len() {
        return Err(Error::Input("spec sidecar lists columns missing from the data".into()));
    }
    let n = table.unit_ids.len();
    MixedDataset::new(table.values, ordered, table.unit_ids, vec![0; n])
}

pub fn write_blocks_tsv(path: &Path, unit_ids: &[String], labels: &[usize]) -> Result<()> {
    let mut s = String::from("unit_id\tblock_id\n");
    for (u, l) in unit_ids.iter().zip(labels) {
        writeln!(s, "{u}\t{l}").expect("string write");
    }
    write_text(path, &s)
}

/// Block labels in the order of `unit_ids`; block names are numbered by first appearance.
pub fn read_blocks_tsv(path: &Path, unit_ids: &[String]) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut label_of: HashMap<String, usize> = HashMap::new();
    let mut assigned: HashMap<String, usize> = HashMap::new();
    for (line, f) in tsv_lines(&text) {
        if line == 1 && f.first() == Some(&"unit_id") {
            continue;
        }
        if f.len() != 2 {
            return Err(parse_err(path, line, format!("expected 2 fields, found {}", f.len())));
        }
        let next = label_of.len();
        let l = *label_of.entry(f[1].to_string()).or_insert(next);
        if assigned.insert(f[0].to_string(), l).is_some() {
            return Err(parse_err(path, line, format!("unit `{}` listed twice", f[0])));
        }
    }
    unit_ids
        .iter()
        .map(|u| assigned.get(u).copied().ok_or_else(|| Error::Input(format!("unit `{u}` has no block in {}", path.display()))))
        .collect()
}

/// One line per edge, no header: `from  to  type  confidence`.
pub fn edges_tsv(graph: &Cpdag, names: &[String], conf: Option<&EdgeConfidence>) -> String {
    let mut s = String::new();
    let fmt_conf = |v: Option<f64>| v.map_or("-".to_string(), fmt_f64);
    for (a, b) in graph.directed_edges() {
        writeln!(s, "{}\t{}\tdirected\t{}", names[a], names[b], fmt_conf(conf.map(|c| c.directed(a, b)))).expect("string write");
    }
    for (a, b) in graph.undirected_edges() {
        writeln!(s, "{}\t{}\tundirected\t{}", names[a], names[b], fmt_conf(conf.map(|c| c.undirected(a, b)))).expect("string write");
    }
    s
}

pub fn write_edges_tsv(path: &Path, graph: &Cpdag, names: &[String], conf: Option<&EdgeConfidence>) -> Result<()> {
    write_text(path, &edges_tsv(graph, names, conf))
}

pub fn read_edges_tsv(path: &Path, names: &[String]) -> Result<Cpdag> {
    let text = read_text(path)?;
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let (mut dir, mut und) = (Vec::new(), Vec::new());
    for (line, f) in tsv_lines(&text) {
        if line == 1 && f.first() == Some(&"from") {
            continue;
        }
        if f.len() != 4 {
            return Err(parse_err(path, line, format!("expected 4 fields, found {}", f.len())));
        }
        let node = |n: &str| index.get(n).copied().ok_or_else(|| parse_err(path, line, format!("unknown node `{n}`")));
        let (a, b) = (node(f[0])?, node(f[1])?);
        match f[2] {
            "directed" => dir.push((a, b)),
            "undirected" => und.push((a, b)),
            other => return Err(parse_err(path, line, format!("unknown edge type `{other}`"))),
        }
    }
    Cpdag::from_edges(names.len(), &dir, &und).map_err(|e| parse_err(path, 0, e.to_string()))
}

/// One `block <id> <size>` header per block followed by its lower triangle.
pub fn cov_text(cov: &BlockCovariance, labels: &[usize]) -> String {
    let mut s = String::new();
    for b in cov.blocks() {
        let id = b.units.first().map_or(0, |&u| labels[u]);
        writeln!(s, "block {id} {}", b.units.len()).expect("string write");
        let m = b.sigma.as_matrix();
        for r in 0..b.units.len() {
            let row: Vec<String> = (0..=r).map(|c| fmt_f64(m[(r, c)])).collect();
            writeln!(s, "{}", row.join("\t")).expect("string write");
        }
    }
    s
}

pub fn write_cov(path: &Path, cov: &BlockCovariance, labels: &[usize]) -> Result<()> {
    write_text(path, &cov_text(cov, labels))
}

pub fn write_preestimate(path: &Path, pre: &PreEstimate, names: &[String]) -> Result<()> {
    let mut s = String::from("node\tthresholds\tparents\titerations\n");
    for j in 0..pre.p() {
        let t = pre.thresholds[j].as_deref().map_or("-".to_string(), join_floats);
        let pa = if pre.parents[j].is_empty() {
            "-".to_string()
        } else {
            pre.parents[j].iter().map(|&k| format!("{}:{}", names[k], fmt_f64(pre.beta[(k, j)]))).collect::<Vec<_>>().join(",")
        };
        writeln!(s, "{}\t{t}\t{pa}\t{}", names[j], pre.trace[j].len()).expect("string write");
    }
    write_text(path, &s)
}

pub fn write_timings(path: &Path, timings: &[StageTiming]) -> Result<()> {
    let mut s = String::from("stage\tseconds\n");
    for t in timings {
        writeln!(s, "{}\t{:.3}", t.stage, t.seconds).expect("string write");
    }
    write_text(path, &s)
}

pub fn write_discretization_report(path: &Path, report: &[ColumnReport]) -> Result<()> {
    let mut s = String::from("name\tmodel\tbic_gauss1\tbic_gmm2\tbic_gmm3\tsw_pvalues\tdecision\n");
    for r in report {
        let model = r.chosen.map_or("-", |m| m.name());
        let sw = if r.sw_pvalues.is_empty() { "-".to_string() } else { join_floats(&r.sw_pvalues) };
        let decision = match r.decision {
            Decision::Continuous => "continuous".to_string(),
            Decision::Discrete { levels } => format!("discrete({levels})"),
        };
        writeln!(s, "{}\t{model}\t{}\t{}\t{}\t{sw}\t{decision}", r.name, fmt_f64(r.bic[0]), fmt_f64(r.bic[1]), fmt_f64(r.bic[2]))
            .expect("string write");
    }
    write_text(path, &s)
}

/// Generic TSV with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut s = header.join("\t");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join("\t"));
        s.push('\n');
    }
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, SimulationSettings};

    #[test]
    fn float_format_has_nine_significant_digits() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(-0.5), "-0.5");
        assert_eq!(fmt_f64(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt_f64(123456.789012), "123456.789");
        assert_eq!(fmt_f64(1.0 / 3.0 * 1e-7), "3.33333333e-8");
        assert_eq!(fmt_f64(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_f64(0.000123456789123), "0.000123456789");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        for v in [0.1, -2.5e-3, 17.25, 1e10] {
            let back: f64 = fmt_f64(v).parse().unwrap();
            assert!((back - v).abs() <= 1e-8 * v.abs());
        }
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let inst = simulate(&SimulationSettings::standard(12, 5), 1).unwrap();
        let (data, specs, blocks) = (dir.path().join("d.csv"), dir.path().join("s.tsv"), dir.path().join("b.tsv"));
        write_data_csv(&data, &inst.data).unwrap();
        write_specs_tsv(&specs, inst.data.specs()).unwrap();
        write_blocks_tsv(&blocks, inst.data.unit_ids(), inst.data.block_labels()).unwrap();
        let back = read_dataset(&data, &specs).unwrap();
        assert_eq!(back.specs(), inst.data.specs());
        assert_eq!(back.unit_ids(), inst.data.unit_ids());
        for j in inst.data.discrete_columns() {
            assert_eq!(back.values().column(j), inst.data.values().column(j));
        }
        assert!((back.values() - inst.data.values()).abs().max() < 1e-7);
        let labels = read_blocks_tsv(&blocks, back.unit_ids()).unwrap();
        assert_eq!(crate::model::groups_from_labels(&labels), inst.data.block_groups());
    }

    #[test]
    fn csv_errors_cite_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let mut text = String::from("a,b\n");
        for i in 0..5 {
            text.push_str(&format!("{i},1\n"));
        }
        text.push_str("7,oops\n");
        fs::write(&p, &text).unwrap();
        let e = read_numeric_csv(&p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 7, .. }), "{e}");
        fs::write(&p, "a,b\n1,2\n3\n").unwrap();
        assert!(matches!(read_numeric_csv(&p).unwrap_err(), Error::Parse { line: 3, .. }));
        fs::write(&p, "a,a\n1,2\n").unwrap();
        assert!(matches!(read_numeric_csv(&p).unwrap_err(), Error::Parse { line: 1, .. }));
        fs::write(&p, "a,b\n1,2\n3,4\n5,6\n").unwrap();
        let t = read_numeric_csv(&p).unwrap();
        assert_eq!((t.values.nrows(), t.values.ncols()), (3, 2));
    }

    #[test]
    fn edge_list_round_trip() {
        let names: Vec<String> = (0..4).map(|i| format!("v{i}")).collect();
        let g = Cpdag::from_edges(4, &[(0, 2), (1, 2)], &[(2, 3)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        write_edges_tsv(&p, &g, &names, None).unwrap();
        assert_eq!(read_edges_tsv(&p, &names).unwrap(), g);
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("v2\tv3\tundirected\t-"));
    }

    #[test]
    fn covariance_text_layout() {
        let cov = BlockCovariance::identity(&[vec![0, 1], vec![2]]);
        assert_eq!(cov_text(&cov, &[5, 5, 9]), "block 5 2\n1\n0\t1\nblock 9 1\n1\n");
    }
}
