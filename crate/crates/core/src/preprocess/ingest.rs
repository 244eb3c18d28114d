use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use super::discretize::{discretization_test, ColumnReport, Decision, DiscretizationReport};
use crate::error::{Error, Result};
use crate::io::read_numeric_csv;
use crate::model::{MixedDataset, VariableKind, VariableSpec};
use crate::rng::Streams;

#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: MixedDataset,
    pub report: DiscretizationReport,
}

fn pinned_report(name: &str, kind: VariableKind) -> ColumnReport {
    let decision = match kind {
        VariableKind::Continuous => Decision::Continuous,
        VariableKind::Discrete { levels } => Decision::Discrete { levels },
    };
    ColumnReport { name: name.to_string(), chosen: None, bic: [f64::INFINITY; 3], sw_pvalues: vec![], decision, codes: None }
}

/// Read an expression CSV (rows = units) and decide each column's kind.
/// Columns named in `overrides` skip the test. Continuous columns are
/// centered; every unit starts in its own block.
pub fn ingest_expression(path: &Path, overrides: &HashMap<String, VariableKind>, streams: &Streams) -> Result<Ingested> {
    let table = read_numeric_csv(path)?;
    if let Some(unknown) = overrides.keys().find(|k| !table.names.contains(k)) {
        return Err(Error::Input(format!("override names unknown column `{unknown}`")));
    }
    let (n, p) = table.values.shape();
    let report: Vec<ColumnReport> = (0..p)
        .into_par_iter()
        .map(|j| {
            let name = &table.names[j];
            match overrides.get(name) {
                Some(kind) => pinned_report(name, *kind),
                None => {
                    let col: Vec<f64> = table.values.column(j).iter().copied().collect();
                    discretization_test(name, &col, &streams.child("column", &[j as u64]))
                }
            }
        })
        .collect();
    let mut values = table.values;
    let mut specs = Vec::with_capacity(p);
    for (j, r) in report.iter().enumerate() {
        match (r.decision, &r.codes) {
            (Decision::Discrete { levels }, Some(codes)) => {
                for (i, &c) in codes.iter().enumerate() {
                    values[(i, j)] = c as f64;
                }
                specs.push(VariableSpec::discrete(&r.name, levels));
            }
            (Decision::Discrete { levels }, None) => specs.push(VariableSpec::discrete(&r.name, levels)),
            (Decision::Continuous, _) => {
                let mean = values.column(j).mean();
                values.column_mut(j).add_scalar_mut(-mean);
                specs.push(VariableSpec::continuous(&r.name));
            }
        }
    }
    let data = MixedDataset::new(values, specs, table.unit_ids, (0..n).collect())?;
    Ok(Ingested { data, report })
}
