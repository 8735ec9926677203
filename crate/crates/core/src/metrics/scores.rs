use std::io::Write;
use std::ops::Range;

use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{Rng, Streams};

use super::probs::{kl_divergence, ClassProbMatrix};

pub const DEFAULT_SPLITS: usize = 10;
pub const DEFAULT_PAIRS_PER_SAMPLE: usize = 32;
/// Class groups up to this size use every ordered pair instead of sampling.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassScore {
    pub class: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub metric: &'static str,
    pub per_class: Vec<ClassScore>,
    pub overall: Summary,
    pub splits: usize,
    /// Pairing protocol, e.g. `exhaustive` or `sampled:32`.
    pub protocol: String,
    /// Conventions applied along the way (singleton classes, empty classes).
    pub notes: Vec<String>,
}

impl ScoreReport {
    /// `metric,class,mean,std,splits,protocol` rows, then an `overall` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_reports_csv(std::slice::from_ref(self), out)
    }

    fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let splits = self.splits.to_string();
        let rows = self
            .per_class
            .iter()
            .map(|c| (c.class.to_string(), c.mean, c.std))
            .chain(std::iter::once((
                "overall".to_string(),
                self.overall.mean,
                self.overall.std,
            )));
        for (class, mean, std) in rows {
            w.write_record([
                self.metric,
                &class,
                &mean.to_string(),
                &std.to_string(),
                &splits,
                &self.protocol,
            ])?;
        }
        Ok(())
    }
}

/// Several reports under one header.
pub fn write_reports_csv<W: Write>(reports: &[ScoreReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "class", "mean", "std", "splits", "protocol"])?;
    for r in reports {
        r.write_rows(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn split_ranges(m: usize, splits: usize) -> Result<Vec<Range<usize>>> {
    if splits == 0 {
        return Err(Error::Config("splits must be at least 1".into()));
    }
    if m < splits {
        return Err(Error::Config(format!(
            "{m} samples cannot fill {splits} splits"
        )));
    }
    Ok((0..splits)
        .map(|s| s * m / splits..(s + 1) * m / splits)
        .collect())
}

/// `exp(mean KL(p(y|x) ‖ p(y)))` per contiguous split, summarized over splits.
pub fn inception_score(p: &ClassProbMatrix, splits: usize) -> Result<ScoreReport> {
    let ranges = split_ranges(p.rows(), splits)?;
    let scores: Vec<f64> = ranges
        .into_iter()
        .map(|r| {
            let py = p.marginal(r.clone());
            let n = r.len() as f64;
            let mean_kl = r.map(|i| kl_divergence(p.row(i), &py)).sum::<f64>() / n;
            mean_kl.exp()
        })
        .collect();
    Ok(ScoreReport {
        metric: "is",
        per_class: Vec::new(),
        overall: Summary::of(&scores),
        splits,
        protocol: "marginal".into(),
        notes: Vec::new(),
    })
}

/// Mean `KL(pᵢ ‖ pⱼ)` over ordered pairs `i ≠ j` drawn from `group`.
fn intra_class_kl(
    p: &ClassProbMatrix,
    group: &[usize],
    pairs_per_sample: usize,
    rng: &mut Rng,
) -> f64 {
    let n = group.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    if n <= EXHAUSTIVE_PAIR_LIMIT {
        for (a, &i) in group.iter().enumerate() {
            for (b, &j) in group.iter().enumerate() {
                if a != b {
                    total += kl_divergence(p.row(i), p.row(j));
                    count += 1;
                }
            }
        }
    } else {
        for (a, &i) in group.iter().enumerate() {
            for _ in 0..pairs_per_sample {
                // uniform over the group minus `a`
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                total += kl_divergence(p.row(i), p.row(group[b]));
                count += 1;
            }
        }
    }
    total / count as f64
}

/// Intra-class diversity score: within each split and each predicted
/// class, `exp(mean KL(pᵢ ‖ pⱼ))` over pairs sharing that class.
///
/// Per-class mean/std are taken across the splits in which the class
/// appears; the overall row summarizes the per-class means. Groups larger
/// than [`EXHAUSTIVE_PAIR_LIMIT`] sample `pairs_per_sample` partners per
/// sample, each `(split, class)` from its own substream of `rng`.
pub fn modified_inception_score(
    p: &ClassProbMatrix,
    splits: usize,
    pairs_per_sample: usize,
    rng: &mut Rng,
) -> Result<ScoreReport> {
    if p.rows() < 2 {
        return Err(Error::Config(
            "modified inception score needs at least 2 samples".into(),
        ));
    }
    let ranges = split_ranges(p.rows(), splits)?;
    let c = p.classes();
    let streams = Streams::new(rng.random());
    let mut per_class_scores: Vec<Vec<f64>> = vec![Vec::new(); c];
    let mut notes = Vec::new();
    let mut sampled = false;

    for (s, range) in ranges.into_iter().enumerate() {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); c];
        for i in range {
            groups[p.predicted()[i]].push(i);
        }
        for (class, group) in groups.iter().enumerate() {
            match group.len() {
                0 => continue,
                1 => notes.push(format!(
                    "split {s}: class {class} has one sample, KL taken as 0"
                )),
                n if n > EXHAUSTIVE_PAIR_LIMIT => sampled = true,
                _ => {}
            }
            if group.len() > EXHAUSTIVE_PAIR_LIMIT && pairs_per_sample == 0 {
                return Err(Error::Config("pairs_per_sample must be at least 1".into()));
            }
            let mut pair_rng = streams.indexed("pairs", (s * c + class) as u64);
            let kl = intra_class_kl(p, group, pairs_per_sample, &mut pair_rng);
            per_class_scores[class].push(kl.exp());
        }
    }

    let mut per_class = Vec::new();
    for (class, scores) in per_class_scores.iter().enumerate() {
        if scores.is_empty() {
            notes.push(format!("class {class} has no samples, omitted"));
            continue;
        }
        let sm = Summary::of(scores);
        per_class.push(ClassScore {
            class,
            mean: sm.mean,
            std: sm.std,
        });
    }
    let means: Vec<f64> = per_class.iter().map(|c| c.mean).collect();
    Ok(ScoreReport {
        metric: "m_is",
        per_class,
        overall: Summary::of(&means),
        splits,
        protocol: if sampled {
            format!("sampled:{pairs_per_sample}")
        } else {
            "exhaustive".into()
        },
        notes,
    })
}
