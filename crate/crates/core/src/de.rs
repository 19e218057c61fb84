//! Differential evolution (DE/best/1, binomial crossover, strict selection).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeParams {
    pub population: usize,
    pub generations: usize,
    pub mutation: f64,
    pub crossover: f64,
    /// Penalty scale for spacing violations.
    pub eta: f64,
}

impl Default for DeParams {
    fn default() -> Self {
        Self { population: 50, generations: 50, mutation: 0.6, crossover: 0.9, eta: 1000.0 }
    }
}

impl DeParams {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::InvalidParameter(format!("population {} < 4", self.population)));
        }
        if !(self.mutation >= 0.0 && self.mutation <= 2.0) {
            return Err(Error::InvalidParameter(format!("mutation factor {}", self.mutation)));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::InvalidParameter(format!("crossover rate {}", self.crossover)));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta {}", self.eta)));
        }
        Ok(())
    }
}

/// Per-dimension box; `lo == hi` pins a coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidParameter("inconsistent DE bounds".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.max(*lo).min(*hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DePopulation {
    pub individuals: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub best: usize,
}

impl DePopulation {
    pub fn best_fitness(&self) -> f64 {
        self.fitness[self.best]
    }

    pub fn best_individual(&self) -> &[f64] {
        &self.individuals[self.best]
    }

    fn locate_best(fitness: &[f64]) -> usize {
        let mut best = 0;
        for (i, f) in fitness.iter().enumerate() {
            if *f > fitness[best] {
                best = i;
            }
        }
        best
    }
}

/// Identifies an evaluation so fitness functions can derive their own RNG streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalTag {
    pub generation: usize,
    pub index: usize,
}

pub trait Fitness: Sync {
    fn evaluate(&self, x: &[f64], tag: EvalTag) -> Result<f64>;
}

impl<F: Fn(&[f64], EvalTag) -> Result<f64> + Sync> Fitness for F {
    fn evaluate(&self, x: &[f64], tag: EvalTag) -> Result<f64> {
        self(x, tag)
    }
}

fn evaluate_all<F: Fitness + ?Sized>(
    xs: &[Vec<f64>],
    generation: usize,
    fitness: &F,
    parallel: bool,
) -> Result<Vec<f64>> {
    let eval = |(index, x): (usize, &Vec<f64>)| fitness.evaluate(x, EvalTag { generation, index });
    if parallel {
        xs.par_iter().enumerate().map(eval).collect()
    } else {
        xs.iter().enumerate().map(eval).collect()
    }
}

/// Uniform initial population; the first `sorted_prefix` coordinates of each
/// individual are sorted ascending.
fn init_positions<R: Rng + ?Sized>(bounds: &Bounds, size: usize, sorted_prefix: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..size)
        .map(|_| {
            let mut x: Vec<f64> =
                bounds.lo.iter().zip(&bounds.hi).map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect();
            x[..sorted_prefix].sort_by(|a, b| a.total_cmp(b));
            x
        })
        .collect()
}

pub fn init_population<R: Rng + ?Sized, F: Fitness + ?Sized>(
    bounds: &Bounds,
    size: usize,
    sorted_prefix: usize,
    rng: &mut R,
    fitness: &F,
    parallel: bool,
) -> Result<DePopulation> {
    let individuals = init_positions(bounds, size, sorted_prefix, rng);
    let fitness = evaluate_all(&individuals, 0, fitness, parallel)?;
    let best = DePopulation::locate_best(&fitness);
    Ok(DePopulation { individuals, fitness, best })
}

fn distinct_pair<R: Rng + ?Sized>(p: usize, size: usize, rng: &mut R) -> (usize, usize) {
    let r1 = loop {
        let r = rng.random_range(0..size);
        if r != p {
            break r;
        }
    };
    let r2 = loop {
        let r = rng.random_range(0..size);
        if r != p && r != r1 {
            break r;
        }
    };
    (r1, r2)
}

/// One generation: mutation around the current best, binomial crossover with
/// one forced mutant coordinate, clamping, and strict-improvement selection.
#[allow(clippy::too_many_arguments)]
pub fn de_step<R: Rng + ?Sized, F: Fitness + ?Sized>(
    pop: &DePopulation,
    params: &DeParams,
    bounds: &Bounds,
    generation: usize,
    rng: &mut R,
    fitness: &F,
    parallel: bool,
) -> Result<DePopulation> {
    let size = pop.individuals.len();
    if size < 4 {
        return Err(Error::InvalidParameter(format!("population {size} < 4")));
    }
    let dim = bounds.dim();
    let best = pop.best_individual();
    let trials: Vec<Vec<f64>> = (0..size)
        .map(|p| {
            let (r1, r2) = distinct_pair(p, size, rng);
            let forced = rng.random_range(0..dim.max(1));
            let current = &pop.individuals[p];
            let mut u: Vec<f64> = (0..dim)
                .map(|j| {
                    let take = rng.random::<f64>() < params.crossover || j == forced;
                    if take {
                        best[j] + params.mutation * (pop.individuals[r1][j] - pop.individuals[r2][j])
                    } else {
                        current[j]
                    }
                })
                .collect();
            bounds.clamp(&mut u);
            u
        })
        .collect();
    let trial_fit = evaluate_all(&trials, generation, fitness, parallel)?;
    let mut next = pop.clone();
    for (p, (u, f)) in trials.into_iter().zip(trial_fit).enumerate() {
        if f > next.fitness[p] {
            next.individuals[p] = u;
            next.fitness[p] = f;
        }
    }
    next.best = DePopulation::locate_best(&next.fitness);
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct DeOutcome {
    pub population: DePopulation,
    /// Best fitness after initialization and after each generation.
    pub trace: Vec<f64>,
}

impl DeOutcome {
    pub fn best(&self) -> &[f64] {
        self.population.best_individual()
    }

    pub fn best_fitness(&self) -> f64 {
        self.population.best_fitness()
    }
}

pub fn run_de<R: Rng + ?Sized, F: Fitness + ?Sized>(
    bounds: &Bounds,
    params: &DeParams,
    sorted_prefix: usize,
    rng: &mut R,
    fitness: &F,
    parallel: bool,
) -> Result<DeOutcome> {
    run_de_seeded(bounds, params, sorted_prefix, &[], rng, fitness, parallel)
}

/// [`run_de`] with `seeded` (clamped) replacing the first random individuals.
pub fn run_de_seeded<R: Rng + ?Sized, F: Fitness + ?Sized>(
    bounds: &Bounds,
    params: &DeParams,
    sorted_prefix: usize,
    seeded: &[Vec<f64>],
    rng: &mut R,
    fitness: &F,
    parallel: bool,
) -> Result<DeOutcome> {
    params.validate()?;
    if seeded.len() > params.population || seeded.iter().any(|x| x.len() != bounds.dim()) {
        return Err(Error::InvalidParameter("seeded individuals do not fit the population".into()));
    }
    let mut pop = if seeded.is_empty() {
        init_population(bounds, params.population, sorted_prefix, rng, fitness, parallel)?
    } else {
        let mut individuals: Vec<Vec<f64>> = init_positions(bounds, params.population, sorted_prefix, rng);
        for (slot, x) in individuals.iter_mut().zip(seeded) {
            slot.copy_from_slice(x);
            bounds.clamp(slot);
        }
        let fitness = evaluate_all(&individuals, 0, fitness, parallel)?;
        let best = DePopulation::locate_best(&fitness);
        DePopulation { individuals, fitness, best }
    };
    let mut trace = vec![pop.best_fitness()];
    for s in 1..=params.generations {
        pop = de_step(&pop, params, bounds, s, rng, fitness, parallel)?;
        trace.push(pop.best_fitness());
    }
    Ok(DeOutcome { population: pop, trace })
}
