//! Panel choice data and its long-format CSV representation.
//!
//! One row per (individual, task, alternative):
//!
//! ```text
//! person_id,task_id,alt_id,chosen,x_1,...,x_p,z_1,...,z_d
//! ```
//!
//! Rows of one task and of one individual must be contiguous.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One decision maker: `T` tasks of `J` alternatives, stacked task-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    id: u64,
    task_ids: Vec<u64>,
    alt_ids: Vec<u64>,
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    chosen: Vec<usize>,
}

impl Individual {
    /// `x` and `z` have one row per (task, alternative); `chosen[t]` is the
    /// position of the chosen alternative within task `t`.
    pub fn new(
        id: u64,
        task_ids: Vec<u64>,
        alt_ids: Vec<u64>,
        x: DMatrix<f64>,
        z: DMatrix<f64>,
        chosen: Vec<usize>,
    ) -> Result<Self> {
        let tasks = task_ids.len();
        if tasks == 0 {
            return Err(Error::invalid(format!("individual {id} has no tasks")));
        }
        if chosen.len() != tasks {
            return Err(Error::dimension_mismatch("chosen alternatives", tasks, chosen.len()));
        }
        let rows = alt_ids.len();
        if rows % tasks != 0 || rows == 0 {
            return Err(Error::invalid(format!("individual {id}: {rows} rows do not split into {tasks} tasks")));
        }
        let j = rows / tasks;
        if x.nrows() != rows {
            return Err(Error::dimension_mismatch("fixed covariate rows", rows, x.nrows()));
        }
        if z.nrows() != rows {
            return Err(Error::dimension_mismatch("random covariate rows", rows, z.nrows()));
        }
        if let Some(t) = chosen.iter().position(|&c| c >= j) {
            return Err(Error::invalid(format!("individual {id} task {t}: chosen index {} out of {j}", chosen[t])));
        }
        Ok(Individual {
            id,
            task_ids,
            alt_ids,
            x,
            z,
            chosen,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn tasks(&self) -> usize {
        self.task_ids.len()
    }

    pub fn alternatives(&self) -> usize {
        self.alt_ids.len() / self.task_ids.len()
    }

    pub fn task_ids(&self) -> &[u64] {
        &self.task_ids
    }

    pub fn alt_ids(&self) -> &[u64] {
        &self.alt_ids
    }

    /// Fixed-coefficient covariates, `(T J) x p`.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Random-coefficient covariates, `(T J) x d`.
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn chosen(&self) -> &[usize] {
        &self.chosen
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceDataset {
    fixed: usize,
    random: usize,
    alternatives: usize,
    individuals: Vec<Individual>,
}

impl ChoiceDataset {
    pub fn new(fixed: usize, random: usize, individuals: Vec<Individual>) -> Result<Self> {
        let first = individuals
            .first()
            .ok_or_else(|| Error::invalid("a dataset needs at least one individual"))?;
        let alternatives = first.alternatives();
        if alternatives < 2 {
            return Err(Error::invalid("every task needs at least two alternatives"));
        }
        for ind in &individuals {
            if ind.x.ncols() != fixed {
                return Err(Error::dimension_mismatch("fixed covariates", fixed, ind.x.ncols()));
            }
            if ind.z.ncols() != random {
                return Err(Error::dimension_mismatch("random covariates", random, ind.z.ncols()));
            }
            if ind.alternatives() != alternatives {
                return Err(Error::invalid(format!(
                    "ragged panel: individual {} has {} alternatives per task, expected {alternatives}",
                    ind.id,
                    ind.alternatives()
                )));
            }
        }
        Ok(ChoiceDataset {
            fixed,
            random,
            alternatives,
            individuals,
        })
    }

    /// `p`, the number of fixed coefficients.
    pub fn fixed_dim(&self) -> usize {
        self.fixed
    }

    /// `d`, the number of random coefficients.
    pub fn random_dim(&self) -> usize {
        self.random
    }

    pub fn alternatives(&self) -> usize {
        self.alternatives
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn total_tasks(&self) -> usize {
        self.individuals.iter().map(Individual::tasks).sum()
    }

    /// Same panel with individuals reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::dimension_mismatch("permutation", self.len(), order.len()));
        }
        let individuals = order.iter().map(|&i| self.individuals[i].clone()).collect();
        ChoiceDataset::new(self.fixed, self.random, individuals)
    }
}

fn header(fixed: usize, random: usize) -> Vec<String> {
    let mut h: Vec<String> = ["person_id", "task_id", "alt_id", "chosen"].map(String::from).to_vec();
    h.extend((1..=fixed).map(|k| format!("x_{k}")));
    h.extend((1..=random).map(|k| format!("z_{k}")));
    h
}

pub fn save_dataset(data: &ChoiceDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(header(data.fixed, data.random)).map_err(csv_io)?;
    let j = data.alternatives;
    let mut record: Vec<String> = Vec::new();
    for ind in &data.individuals {
        for t in 0..ind.tasks() {
            for a in 0..j {
                let row = t * j + a;
                record.clear();
                record.push(ind.id.to_string());
                record.push(ind.task_ids[t].to_string());
                record.push(ind.alt_ids[row].to_string());
                record.push(u8::from(ind.chosen[t] == a).to_string());
                record.extend(ind.x.row(row).iter().map(f64::to_string));
                record.extend(ind.z.row(row).iter().map(f64::to_string));
                w.write_record(&record).map_err(csv_io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Dataset {
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}

/// Rows of one individual accumulated while reading.
struct Pending {
    id: u64,
    task_ids: Vec<u64>,
    alt_ids: Vec<u64>,
    x: Vec<f64>,
    z: Vec<f64>,
    chosen: Vec<Option<usize>>,
    task_rows: usize,
    task_line: usize,
}

pub fn load_dataset(path: &Path) -> Result<ChoiceDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_io)?;
    let bad = |line: u64, msg: String| Error::Dataset {
        line: line as usize,
        msg,
    };

    let head = reader.headers().map_err(csv_io)?.clone();
    let names: Vec<&str> = head.iter().collect();
    if names.len() < 4 || names[..4] != ["person_id", "task_id", "alt_id", "chosen"] {
        return Err(bad(1, "header must start with person_id,task_id,alt_id,chosen".into()));
    }
    let fixed = names[4..].iter().take_while(|n| n.starts_with("x_")).count();
    let random = names.len() - 4 - fixed;
    if names != header(fixed, random) {
        return Err(bad(1, format!("expected header {}", header(fixed, random).join(","))));
    }
    let width = names.len();

    let mut done: Vec<Individual> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut cur: Option<Pending> = None;
    let mut alternatives: Option<usize> = None;

    let close_task = |p: &mut Pending, line: usize, alternatives: &mut Option<usize>| -> Result<()> {
        let Some(Some(_)) = p.chosen.last() else {
            return Err(bad(line as u64, format!("person {} task {} has no chosen alternative", p.id, p.task_ids.last().unwrap())));
        };
        match alternatives {
            None => *alternatives = Some(p.task_rows),
            Some(j) if *j != p.task_rows => {
                return Err(bad(
                    line as u64,
                    format!("ragged panel: person {} task {} has {} alternatives, expected {j}", p.id, p.task_ids.last().unwrap(), p.task_rows),
                ))
            }
            _ => {}
        }
        Ok(())
    };

    for rec in reader.records() {
        let rec = rec.map_err(csv_io)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(bad(line, format!("expected {width} fields as in the header, found {}", rec.len())));
        }
        let int = |k: usize| -> Result<u64> {
            rec[k]
                .parse::<u64>()
                .map_err(|_| bad(line, format!("column {} is not a non-negative integer: `{}`", names[k], &rec[k])))
        };
        let person = int(0)?;
        let task = int(1)?;
        let alt = int(2)?;
        let chosen = match &rec[3] {
            "0" => false,
            "1" => true,
            other => return Err(bad(line, format!("chosen must be 0 or 1, found `{other}`"))),
        };
        let mut values = Vec::with_capacity(fixed + random);
        for k in 4..width {
            let v: f64 = rec[k]
                .parse()
                .map_err(|_| bad(line, format!("column {} is not numeric: `{}`", names[k], &rec[k])))?;
            if !v.is_finite() {
                return Err(bad(line, format!("column {} is not finite", names[k])));
            }
            values.push(v);
        }

        let new_person = cur.as_ref().is_none_or(|p| p.id != person);
        if new_person {
            if let Some(mut p) = cur.take() {
                close_task(&mut p, line as usize - 1, &mut alternatives)?;
                done.push(finish(p, fixed, random)?);
            }
            if !seen.insert(person) {
                return Err(bad(line, format!("rows for person {person} are not contiguous")));
            }
            cur = Some(Pending {
                id: person,
                task_ids: Vec::new(),
                alt_ids: Vec::new(),
                x: Vec::new(),
                z: Vec::new(),
                chosen: Vec::new(),
                task_rows: 0,
                task_line: line as usize,
            });
        }
        let p = cur.as_mut().expect("current individual");
        if p.task_ids.last() != Some(&task) {
            if !p.task_ids.is_empty() {
                close_task(p, line as usize - 1, &mut alternatives)?;
            }
            if p.task_ids.contains(&task) {
                return Err(bad(line, format!("rows for person {person} task {task} are not contiguous")));
            }
            p.task_ids.push(task);
            p.chosen.push(None);
            p.task_rows = 0;
            p.task_line = line as usize;
        }
        if chosen {
            let slot = p.chosen.last_mut().expect("open task");
            if slot.is_some() {
                return Err(bad(line, format!("person {person} task {task} has more than one chosen alternative")));
            }
            *slot = Some(p.task_rows);
        }
        p.task_rows += 1;
        p.alt_ids.push(alt);
        p.x.extend_from_slice(&values[..fixed]);
        p.z.extend_from_slice(&values[fixed..]);
    }
    match cur.take() {
        Some(mut p) => {
            let line = p.task_line + p.task_rows - 1;
            close_task(&mut p, line, &mut alternatives)?;
            done.push(finish(p, fixed, random)?);
        }
        None => return Err(bad(2, "no data rows".into())),
    }
    ChoiceDataset::new(fixed, random, done)
}

fn finish(p: Pending, fixed: usize, random: usize) -> Result<Individual> {
    let rows = p.alt_ids.len();
    let chosen = p.chosen.into_iter().map(|c| c.expect("checked when the task closed")).collect();
    Individual::new(
        p.id,
        p.task_ids,
        p.alt_ids,
        DMatrix::from_row_slice(rows, fixed, &p.x),
        DMatrix::from_row_slice(rows, random, &p.z),
        chosen,
    )
}
