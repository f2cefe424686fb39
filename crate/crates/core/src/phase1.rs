//! Phase I: choose which stocks enter each candidate portfolio.
//!
//! Genomes are 0/1 inclusion strings over the filtered universe. NSGA-II
//! maximizes the summed score and the mean market cap of the selection (and,
//! for the growth mandate, minimizes mean book-to-price), with penalties for
//! cardinality, market-cap and style violations.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use log::info;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{universe_targets, UniverseSnapshot};
use crate::engine::{
    bit_flip_in_place, crowding_distance, run_nsga2, single_point_crossover, EaParams, EaRng,
    Evaluation, Genome, ObjectiveVector, Problem, SelectionGenome,
};
use crate::error::{Error, Result};
use crate::portfolio::{Candidate, Portfolio};

/// Violation assigned to an empty selection.
pub const EMPTY_SELECTION_VIOLATION: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mandate {
    #[default]
    LargeCap,
    LargeCapGrowth,
}

impl Mandate {
    pub fn objective_count(self) -> usize {
        match self {
            Mandate::LargeCap => 2,
            Mandate::LargeCapGrowth => 3,
        }
    }

    pub fn is_growth(self) -> bool {
        self == Mandate::LargeCapGrowth
    }
}

impl fmt::Display for Mandate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mandate::LargeCap => "large_cap",
            Mandate::LargeCapGrowth => "large_cap_growth",
        })
    }
}

impl FromStr for Mandate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "large_cap" | "largecap" => Ok(Mandate::LargeCap),
            "large_cap_growth" | "growth" => Ok(Mandate::LargeCapGrowth),
            other => Err(Error::InvalidArgument(format!("unknown mandate {other:?}"))),
        }
    }
}

fn default_initial_popcount() -> usize {
    156
}
fn default_max_candidates() -> usize {
    50
}
fn default_large_cap_params() -> EaParams {
    EaParams::new(500, 1200, 0.03)
}
fn default_growth_params() -> EaParams {
    EaParams::new(50, 1200, 0.03)
}

/// Per-mandate NSGA-II presets and output sizing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Phase1Config {
    #[serde(default = "default_large_cap_params")]
    pub large_cap: EaParams,
    #[serde(default = "default_growth_params")]
    pub growth: EaParams,
    /// Bits set in each random generation-zero genome.
    #[serde(default = "default_initial_popcount")]
    pub initial_popcount: usize,
    #[serde(default = "default_max_candidates")]
    pub max_candidates: usize,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Phase1Config {
            large_cap: default_large_cap_params(),
            growth: default_growth_params(),
            initial_popcount: default_initial_popcount(),
            max_candidates: default_max_candidates(),
        }
    }
}

impl Phase1Config {
    pub fn params(&self, mandate: Mandate) -> &EaParams {
        match mandate {
            Mandate::LargeCap => &self.large_cap,
            Mandate::LargeCapGrowth => &self.growth,
        }
    }

    pub fn params_mut(&mut self, mandate: Mandate) -> &mut EaParams {
        match mandate {
            Mandate::LargeCap => &mut self.large_cap,
            Mandate::LargeCapGrowth => &mut self.growth,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectionProblem {
    as_of: Option<NaiveDate>,
    candidates: Vec<Candidate>,
    asset_ids: Vec<String>,
    /// (mean market cap, mean book-to-price) of the filtered universe.
    targets: (f64, f64),
    mandate: Mandate,
    cardinality: (usize, usize),
    priors: Vec<SelectionGenome>,
    initial_popcount: usize,
    max_book_to_price: f64,
}

impl SelectionProblem {
    pub fn new(universe: &UniverseSnapshot, mandate: Mandate, cardinality: (usize, usize)) -> Result<Self> {
        let targets = universe_targets(universe);
        let mut p = Self::from_candidates(universe.candidates.clone(), targets, mandate, cardinality)?;
        p.as_of = Some(universe.as_of);
        Ok(p)
    }

    pub fn from_candidates(
        candidates: Vec<Candidate>,
        targets: (f64, f64),
        mandate: Mandate,
        cardinality: (usize, usize),
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyUniverse("no candidates for phase 1".into()));
        }
        let (min_n, max_n) = cardinality;
        if min_n == 0 || min_n > max_n {
            return Err(Error::InvalidArgument(format!("bad cardinality range [{min_n}, {max_n}]")));
        }
        let asset_ids = candidates.iter().map(|c| c.asset_id.clone()).collect();
        let max_book_to_price = candidates.iter().map(|c| c.book_to_price).fold(0.0, f64::max);
        Ok(SelectionProblem {
            as_of: None,
            candidates,
            asset_ids,
            targets,
            mandate,
            cardinality,
            priors: Vec::new(),
            initial_popcount: default_initial_popcount(),
            max_book_to_price,
        })
    }

    /// Re-indexes prior portfolios (as asset-id sets) onto this universe.
    /// Assets no longer present are dropped; nothing is substituted.
    pub fn with_priors<S: AsRef<str>>(mut self, priors: &[Vec<S>]) -> Self {
        self.priors = priors.iter().map(|p| self.genome_for(p.iter().map(AsRef::as_ref))).collect();
        self
    }

    pub fn with_initial_popcount(mut self, n: usize) -> Self {
        self.initial_popcount = n;
        self
    }

    pub fn as_of(&self) -> Option<NaiveDate> {
        self.as_of
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn targets(&self) -> (f64, f64) {
        self.targets
    }

    pub fn mandate(&self) -> Mandate {
        self.mandate
    }

    pub fn cardinality(&self) -> (usize, usize) {
        self.cardinality
    }

    pub fn priors(&self) -> &[SelectionGenome] {
        &self.priors
    }

    /// Genome selecting the listed assets; unknown ids are ignored.
    pub fn genome_for<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> SelectionGenome {
        let pos: HashMap<&str, usize> = self.asset_ids.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        SelectionGenome::from_indices(self.asset_ids.len(), ids.into_iter().filter_map(|id| pos.get(id).copied()))
    }

    pub fn selected_ids(&self, genome: &SelectionGenome) -> Vec<String> {
        genome.selected().map(|i| self.asset_ids[i].clone()).collect()
    }

    /// Equal-weighted portfolio over the selection, so weighted and
    /// unweighted averages agree.
    pub fn equal_weighted(&self, genome: &SelectionGenome) -> Portfolio {
        let k = genome.popcount();
        Portfolio::new(genome.selected().map(|i| (self.asset_ids[i].clone(), 1.0 / k as f64)))
    }

    fn random_popcount(&self) -> usize {
        self.initial_popcount.min(self.cardinality.1).min(self.candidates.len())
    }
}

/// Raw objectives (minimization orientation) and normalized violation of a
/// selection.
pub fn evaluate_selection(genome: &SelectionGenome, problem: &SelectionProblem) -> Result<Evaluation> {
    if genome.len() != problem.candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "genome length {} does not match universe size {}",
            genome.len(),
            problem.candidates.len()
        )));
    }
    Ok(evaluate_unchecked(genome, problem))
}

fn evaluate_unchecked(genome: &SelectionGenome, problem: &SelectionProblem) -> Evaluation {
    let growth = problem.mandate.is_growth();
    let (mut score, mut cap, mut bp, mut k) = (0.0, 0.0, 0.0, 0usize);
    for i in genome.selected() {
        let c = &problem.candidates[i];
        score += c.score;
        cap += c.market_cap;
        bp += c.book_to_price;
        k += 1;
    }
    if k == 0 {
        let mut objectives = vec![0.0, 0.0];
        if growth {
            objectives.push(problem.max_book_to_price);
        }
        return Evaluation {
            objectives,
            violation: EMPTY_SELECTION_VIOLATION,
        };
    }
    let mean_cap = cap / k as f64;
    let mean_bp = bp / k as f64;
    let (min_n, max_n) = problem.cardinality;
    let (cap_target, bp_ceiling) = problem.targets;

    let mut violation = if k < min_n {
        (min_n - k) as f64 / min_n as f64
    } else if k > max_n {
        (k - max_n) as f64 / max_n as f64
    } else {
        0.0
    };
    if mean_cap < cap_target {
        violation += (cap_target - mean_cap) / cap_target.abs().max(f64::MIN_POSITIVE);
    }
    let mut objectives = vec![-score, -mean_cap];
    if growth {
        objectives.push(mean_bp);
        if mean_bp > bp_ceiling {
            violation += (mean_bp - bp_ceiling) / bp_ceiling.abs().max(1e-12);
        }
    }
    Evaluation { objectives, violation }
}

impl Problem for SelectionProblem {
    type Genome = SelectionGenome;

    fn objective_count(&self) -> usize {
        self.mandate.objective_count()
    }

    fn genome_len(&self) -> usize {
        self.candidates.len()
    }

    fn evaluate(&self, genome: &SelectionGenome) -> Evaluation {
        evaluate_unchecked(genome, self)
    }

    fn random_genome(&self, rng: &mut EaRng) -> SelectionGenome {
        let n = self.candidates.len();
        let picks = index::sample(rng, n, self.random_popcount());
        SelectionGenome::from_indices(n, picks)
    }

    fn crossover(
        &self,
        a: &SelectionGenome,
        b: &SelectionGenome,
        _params: &EaParams,
        rng: &mut EaRng,
    ) -> (SelectionGenome, SelectionGenome) {
        single_point_crossover(a, b, rng).expect("parents share the universe length")
    }

    fn mutate(&self, genome: &mut SelectionGenome, params: &EaParams, rng: &mut EaRng) {
        bit_flip_in_place(genome, params.mutation_rate, rng);
    }
}

/// Generation zero: priors verbatim, then random genomes with a fixed
/// popcount.
pub fn seed_generation_zero(problem: &SelectionProblem, population_size: usize, rng: &mut EaRng) -> Vec<SelectionGenome> {
    let mut out: Vec<SelectionGenome> = problem.priors.iter().take(population_size).cloned().collect();
    while out.len() < population_size {
        out.push(problem.random_genome(rng));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePortfolio {
    pub genome: SelectionGenome,
    pub objectives: ObjectiveVector,
    /// Carried over from the previous rebalance rather than evolved.
    pub carried_over: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePortfolioSet {
    pub as_of: Option<NaiveDate>,
    pub mandate: Mandate,
    pub asset_ids: Vec<String>,
    pub portfolios: Vec<CandidatePortfolio>,
}

impl CandidatePortfolioSet {
    pub fn len(&self) -> usize {
        self.portfolios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.portfolios.is_empty()
    }

    pub fn asset_ids_of(&self, genome: &SelectionGenome) -> Vec<String> {
        genome.selected().map(|i| self.asset_ids[i].clone()).collect()
    }

    pub fn asset_sets(&self) -> Vec<Vec<String>> {
        self.portfolios.iter().map(|p| self.asset_ids_of(&p.genome)).collect()
    }
}

/// Runs NSGA-II and reduces its final front to at most `max_candidates`
/// feasible portfolios, then appends prior portfolios that still satisfy
/// the current constraints.
pub fn run_phase1(problem: &SelectionProblem, params: &EaParams, max_candidates: usize) -> Result<CandidatePortfolioSet> {
    let front = run_nsga2(problem, params, &problem.priors)?;

    let mut seen: HashSet<&SelectionGenome> = HashSet::new();
    let mut feasible: Vec<(&SelectionGenome, &ObjectiveVector)> = Vec::new();
    for ind in &front {
        if ind.is_feasible() && seen.insert(&ind.genome) {
            feasible.push((&ind.genome, ind.objectives()));
        }
    }

    if feasible.len() > max_candidates {
        let objs: Vec<&ObjectiveVector> = feasible.iter().map(|f| f.1).collect();
        let d = crowding_distance(&objs);
        let mut order: Vec<usize> = (0..feasible.len()).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
        let keep: BTreeSet<usize> = order.into_iter().take(max_candidates).collect();
        feasible = keep.into_iter().map(|i| feasible[i]).collect();
    }

    let mut portfolios: Vec<CandidatePortfolio> = feasible
        .into_iter()
        .map(|(g, o)| CandidatePortfolio {
            genome: g.clone(),
            objectives: o.clone(),
            carried_over: false,
        })
        .collect();
    let evolved = portfolios.len();

    for prior in &problem.priors {
        let eval = problem.evaluate(prior);
        if eval.violation == 0.0 && !portfolios.iter().any(|p| &p.genome == prior) {
            portfolios.push(CandidatePortfolio {
                genome: prior.clone(),
                objectives: ObjectiveVector::new(eval.objectives),
                carried_over: true,
            });
        }
    }

    if portfolios.is_empty() {
        let best = front.iter().min_by(|a, b| a.violation.total_cmp(&b.violation));
        let detail = match best {
            Some(b) => format!(
                "no feasible selection; least-violating front member has {} assets and violation {:.4}",
                b.genome.popcount(),
                b.violation
            ),
            None => "empty final front".into(),
        };
        return Err(Error::Phase1Infeasible(detail));
    }
    info!(
        "phase 1 ({}): {} evolved candidates, {} carried over",
        problem.mandate,
        evolved,
        portfolios.len() - evolved
    );

    Ok(CandidatePortfolioSet {
        as_of: problem.as_of,
        mandate: problem.mandate,
        asset_ids: problem.asset_ids.clone(),
        portfolios,
    })
}

fn objective_header(mandate: Mandate) -> Vec<&'static str> {
    let mut h = vec!["portfolio", "score_sum", "mean_market_cap"];
    if mandate.is_growth() {
        h.push("mean_book_to_price");
    }
    h
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Writes the objectives file (natural orientation: larger score sum and
/// cap are better) and the 0/1 portfolios file.
pub fn write_phase1_outputs(set: &CandidatePortfolioSet, objectives_path: &Path, portfolios_path: &Path) -> Result<()> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("no portfolios to write".into()));
    }
    let mut w = csv::Writer::from_path(objectives_path).map_err(|e| csv_err(objectives_path, e))?;
    w.write_record(objective_header(set.mandate)).map_err(|e| csv_err(objectives_path, e))?;
    for (i, p) in set.portfolios.iter().enumerate() {
        let mut row = vec![i.to_string()];
        for (j, v) in p.objectives.values().iter().enumerate() {
            let natural = if j < 2 { -v } else { *v };
            row.push(natural.to_string());
        }
        w.write_record(&row).map_err(|e| csv_err(objectives_path, e))?;
    }
    w.flush().map_err(|e| Error::io(objectives_path, e))?;

    let mut w = csv::Writer::from_path(portfolios_path).map_err(|e| csv_err(portfolios_path, e))?;
    w.write_record(&set.asset_ids).map_err(|e| csv_err(portfolios_path, e))?;
    for p in &set.portfolios {
        w.write_record(p.genome.bits().iter().map(|&b| if b { "1" } else { "0" }))
            .map_err(|e| csv_err(portfolios_path, e))?;
    }
    w.flush().map_err(|e| Error::io(portfolios_path, e))
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Reads a portfolios file back as (asset ids, genomes).
pub fn read_phase1_portfolios(path: &Path) -> Result<(Vec<String>, Vec<SelectionGenome>)> {
    let mut r = open_reader(path)?;
    let ids: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    let mut genomes = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bits = rec
            .iter()
            .map(|f| match f {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected 0 or 1, found {other:?}"),
                }),
            })
            .collect::<Result<Vec<bool>>>()?;
        genomes.push(SelectionGenome(bits));
    }
    Ok((ids, genomes))
}

/// Reads an objectives file back into minimization orientation.
pub fn read_phase1_objectives(path: &Path) -> Result<Vec<ObjectiveVector>> {
    let mut r = open_reader(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let values = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, f)| {
                let v: f64 = f.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("bad objective value {f:?}"),
                })?;
                Ok(if j < 2 { -v } else { v })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(ObjectiveVector::new(values));
    }
    Ok(out)
}
