//! Analysis reports: relatedness rankings, a 2-D projection of the corpus
//! embeddings and the strategy comparison table. Everything is emitted as
//! CSV with a header row.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::corpus::CorpusSet;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::sampler::{similarity_vector, SamplingDistribution, SimilarityVector};
use crate::trainer::{EpochRecord, Strategy};

fn csv_error(e: csv::Error) -> Error {
    Error::numeric("csv output", e.to_string())
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::numeric("csv output", e.to_string()))
}

/// `corpus_id,score,prob` for every corpus.
pub fn write_similarity_csv<W: Write>(
    w: W,
    corpus_ids: &[String],
    sims: &SimilarityVector,
    dist: &SamplingDistribution,
) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        corpus_id: &'a str,
        score: f64,
        prob: f64,
    }
    write_rows(
        w,
        corpus_ids
            .iter()
            .zip(&sims.scores)
            .zip(&dist.probs)
            .map(|((id, &score), &prob)| Row { corpus_id: id, score, prob }),
    )
}

/// Most related corpora for one target, the target itself excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub target_corpus_id: String,
    pub related: Vec<(String, f64)>,
}

/// Top-`k` corpora by cosine similarity to the target; ties go to the
/// lexicographically smaller corpus id.
pub fn rank_related(e: &EmbeddingMatrix, target_index: usize, k: usize) -> Result<RankingReport> {
    if e.len() < 2 || k > e.len() - 1 {
        return Err(Error::validation("k", format!("{k} exceeds the {} other corpora", e.len().saturating_sub(1))));
    }
    let sims = similarity_vector(e, target_index)?;
    let ids = e.corpus_ids();
    let mut related: Vec<(String, f64)> = (0..e.len())
        .filter(|&i| i != target_index)
        .map(|i| (ids[i].clone(), sims.scores[i]))
        .collect();
    related.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    related.truncate(k);
    Ok(RankingReport {
        target_corpus_id: ids[target_index].clone(),
        related,
    })
}

/// `target_corpus_id,rank,corpus_id,score`, ranks starting at 1.
pub fn write_ranking_csv<W: Write>(w: W, reports: &[RankingReport]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        target_corpus_id: &'a str,
        rank: usize,
        corpus_id: &'a str,
        score: f64,
    }
    write_rows(
        w,
        reports.iter().flat_map(|r| {
            r.related.iter().enumerate().map(move |(i, (id, score))| Row {
                target_corpus_id: &r.target_corpus_id,
                rank: i + 1,
                corpus_id: id,
                score: *score,
            })
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedPoint {
    pub corpus_id: String,
    pub language_id: String,
    pub domain_id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D {
    pub points: Vec<ProjectedPoint>,
}

/// Centers the rows and projects them onto the two leading principal
/// directions. Each direction's largest-magnitude component is made
/// positive so the output is deterministic. Rows with zero spread map to
/// the origin.
pub fn project_2d(e: &EmbeddingMatrix) -> Result<Projection2D> {
    let (n, d) = (e.len(), e.dim());
    if n < 2 {
        return Err(Error::validation("embeddings", "projection needs at least two corpora"));
    }
    if d == 0 {
        return Err(Error::validation("embeddings", "zero-dimensional embeddings"));
    }
    let mut x = DMatrix::from_fn(n, d, |i, j| e.row(i)[j]);
    for j in 0..d {
        let mean = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = x.transpose() * &x;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut coords = vec![[0.0f64; 2]; n];
    for (axis, &k) in order.iter().take(2).enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, c)| if c.abs() > acc.1.abs() { (i, *c) } else { acc })
            .1;
        if pivot < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
        for (i, c) in coords.iter_mut().enumerate() {
            c[axis] = x.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
    }
    if coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numeric("project_2d", "non-finite coordinate"));
    }
    // Remove rounding residue so the output is centered to working precision.
    for axis in 0..2 {
        let mean = coords.iter().map(|c| c[axis]).sum::<f64>() / n as f64;
        coords.iter_mut().for_each(|c| c[axis] -= mean);
    }
    Ok(Projection2D {
        points: e
            .corpus_ids()
            .iter()
            .zip(coords)
            .map(|(id, [x, y])| ProjectedPoint {
                corpus_id: id.clone(),
                language_id: String::new(),
                domain_id: String::new(),
                x,
                y,
            })
            .collect(),
    })
}

impl Projection2D {
    /// Fills language and domain tags from the corpus set, matched by id.
    pub fn tagged(mut self, set: &CorpusSet) -> Result<Self> {
        for p in &mut self.points {
            let meta = &set.corpora()[set.index_of(&p.corpus_id)?].meta;
            p.language_id = meta.language_id.clone();
            p.domain_id = meta.domain_id.clone();
        }
        Ok(self)
    }

    /// Mean pairwise distance between same-domain points and between
    /// cross-domain points. `None` where no such pair exists.
    pub fn domain_distances(&self) -> (Option<f64>, Option<f64>) {
        let (mut same, mut cross) = ((0.0, 0usize), (0.0, 0usize));
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                let d = (a.x - b.x).hypot(a.y - b.y);
                let acc = if a.domain_id == b.domain_id { &mut same } else { &mut cross };
                acc.0 += d;
                acc.1 += 1;
            }
        }
        let mean = |(s, c): (f64, usize)| (c > 0).then(|| s / c as f64);
        (mean(same), mean(cross))
    }

    /// `corpus_id,language_id,domain_id,x,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(w, &self.points)
    }
}

/// Final held-out target PER per strategy for each target, plus the
/// cross-target average.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub average: ComparisonRow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub target_corpus_id: String,
    pub pretrain_per: Option<f64>,
    pub finetune_per: Option<f64>,
    pub crs_per: Option<f64>,
}

/// Builds the comparison from run logs of the same data seed.
pub fn compare_strategies(logs: &[Vec<EpochRecord>]) -> Result<ComparisonTable> {
    let mut seeds = logs.iter().filter_map(|l| l.first()).map(|r| r.data_seed);
    if let Some(first) = seeds.next() {
        if let Some(other) = seeds.find(|&s| s != first) {
            return Err(Error::validation(
                "run logs",
                format!("logs come from different data seeds ({first} and {other}); PERs are not comparable"),
            ));
        }
    }
    let mut by_target: BTreeMap<String, ComparisonRow> = BTreeMap::new();
    for log in logs {
        let Some(last) = log.iter().rev().find(|r| r.target_heldout_per.is_some()) else {
            return Err(Error::validation("run log", "no held-out PER recorded"));
        };
        let row = by_target.entry(last.target_corpus_id.clone()).or_insert_with(|| ComparisonRow {
            target_corpus_id: last.target_corpus_id.clone(),
            pretrain_per: None,
            finetune_per: None,
            crs_per: None,
        });
        let slot = match last.strategy {
            Strategy::Pretrain => &mut row.pretrain_per,
            Strategy::Finetune => &mut row.finetune_per,
            Strategy::Crs => &mut row.crs_per,
            Strategy::Embedding => {
                return Err(Error::validation("run log", "embedding-phase logs are not a strategy"))
            }
        };
        if slot.is_some() {
            return Err(Error::validation(
                "run logs",
                format!("two {} logs for target `{}`", last.strategy, last.target_corpus_id),
            ));
        }
        *slot = last.target_heldout_per;
    }
    let rows: Vec<ComparisonRow> = by_target.into_values().collect();
    let mean = |f: fn(&ComparisonRow) -> Option<f64>| {
        let vals: Vec<f64> = rows.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let average = ComparisonRow {
        target_corpus_id: "Average".into(),
        pretrain_per: mean(|r| r.pretrain_per),
        finetune_per: mean(|r| r.finetune_per),
        crs_per: mean(|r| r.crs_per),
    };
    Ok(ComparisonTable { rows, average })
}

impl ComparisonTable {
    /// `target_corpus_id,pretrain_per,finetune_per,crs_per`; the last row is
    /// `Average`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(w, self.rows.iter().chain(std::iter::once(&self.average)))
    }
}
