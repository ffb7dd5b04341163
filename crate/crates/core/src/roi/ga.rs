use std::cmp::Ordering;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conic::{canonical_from_conic, conic_from_points, ConicCoeffs};
use crate::error::{Error, Result};
use crate::imgcore::sample::nearest;
use crate::imgcore::BinaryMask;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Standard deviation of point mutations, in pixels.
    pub mutation_sigma: f64,
    pub tournament_size: usize,
    pub elite_count: usize,
    /// Circumference samples per hypothesis.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 200,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            mutation_sigma: 5.0,
            tournament_size: 3,
            elite_count: 2,
            samples: 360,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(format!("ga: {msg}")));
        if self.population_size < self.elite_count + 2 {
            return fail("population_size must be at least elite_count + 2");
        }
        if self.tournament_size < 2 {
            return fail("tournament_size must be at least 2");
        }
        for (name, p) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return fail(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.mutation_sigma >= 0.0) {
            return fail("mutation_sigma must be non-negative");
        }
        if self.samples < 8 {
            return fail("samples must be at least 8");
        }
        Ok(())
    }
}

/// Five circumference points, each an indivisible integer pixel coordinate pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Chromosome {
    pub points: [[i32; 2]; 5],
}

impl Chromosome {
    pub fn new(points: [[i32; 2]; 5], width: usize, height: usize) -> Result<Self> {
        let in_bounds =
            points.iter().all(|p| p[0] >= 0 && p[1] >= 0 && (p[0] as usize) < width && (p[1] as usize) < height);
        if !in_bounds {
            return Err(Error::InvalidConfig("chromosome point outside the image".into()));
        }
        let c = Self { points };
        if c.has_duplicates() {
            return Err(Error::SingularConfiguration);
        }
        Ok(c)
    }

    fn has_duplicates(&self) -> bool {
        (0..5).any(|i| (i + 1..5).any(|j| self.points[i] == self.points[j]))
    }

    pub fn decode<T: Real>(&self) -> Result<ConicCoeffs<T>> {
        let pts = self.points.map(|p| [T::lit(p[0] as f64), T::lit(p[1] as f64)]);
        conic_from_points(&pts)
    }
}

/// Dilated edge map plus a cached angle table for fitness evaluation.
pub(crate) struct EdgeField<T> {
    dilated: BinaryMask,
    trig: Vec<(T, T)>,
}

impl<T: Real> EdgeField<T> {
    pub(crate) fn new(edges: &BinaryMask, samples: usize) -> Self {
        let step = T::TAU() / T::from_usize_lossy(samples);
        let trig = (0..samples).map(|i| (step * T::from_usize_lossy(i)).sin_cos()).collect();
        Self { dilated: edges.dilate3(), trig }
    }

    pub(crate) fn fitness(&self, conic: &ConicCoeffs<T>) -> Result<T> {
        let e = canonical_from_conic(conic)?;
        let (s, c) = e.theta.sin_cos();
        let (w, h) = self.dilated.dims();
        let hits = self
            .trig
            .iter()
            .filter(|&&(st, ct)| {
                let x = e.x0 + e.a * ct * c - e.b * st * s;
                let y = e.y0 + e.a * ct * s + e.b * st * c;
                nearest(w, h, x, y).is_some_and(|(ix, iy)| self.dilated.get(ix, iy))
            })
            .count();
        Ok(T::from_usize_lossy(hits) / T::from_usize_lossy(self.trig.len()))
    }

    fn score(&self, chromosome: &Chromosome) -> T {
        chromosome.decode::<T>().and_then(|conic| self.fitness(&conic)).unwrap_or_else(|_| T::zero())
    }
}

/// Share of `n_s` circumference samples that land on the edge map dilated by
/// one pixel. Samples outside the image score zero.
pub fn fitness<T: Real>(conic: &ConicCoeffs<T>, edges: &BinaryMask, n_s: usize) -> Result<T> {
    EdgeField::new(edges, n_s).fitness(conic)
}

/// Outcome of a genetic ellipse search.
#[derive(Debug, Clone)]
pub struct GaFit<T: Real> {
    pub conic: ConicCoeffs<T>,
    pub fitness: T,
    pub chromosome: Chromosome,
    /// Best fitness after initialisation and after each generation.
    pub best_per_generation: Vec<T>,
}

#[derive(Clone, Copy)]
struct Individual<T> {
    genes: Chromosome,
    fitness: T,
    /// Evaluation order; earlier wins fitness ties.
    id: usize,
}

fn better<T: Real>(a: &Individual<T>, b: &Individual<T>) -> bool {
    match a.fitness.partial_cmp(&b.fitness) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Less) => false,
        _ => a.id < b.id,
    }
}

/// Genetic search for the ellipse best supported by `edges`.
///
/// The run is deterministic for a given seed: all random draws happen
/// sequentially and fitness evaluation consumes none.
pub fn fit_ellipse_ga<T: Real>(edges: &BinaryMask, config: &GaConfig) -> Result<GaFit<T>> {
    config.validate()?;
    let edge_pixels: Vec<[i32; 2]> = edges.iter_set().map(|(x, y)| [x as i32, y as i32]).collect();
    if edge_pixels.len() < 5 {
        return Err(Error::InsufficientEdges { found: edge_pixels.len() });
    }
    let (w, h) = edges.dims();
    let field = EdgeField::<T>::new(edges, config.samples);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.mutation_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut next_id = 0usize;
    let mut evaluate = |genes: Vec<Chromosome>| -> Vec<Individual<T>> {
        let scores: Vec<T> = genes.par_iter().map(|g| field.score(g)).collect();
        genes
            .into_iter()
            .zip(scores)
            .map(|(genes, fitness)| {
                next_id += 1;
                Individual { genes, fitness, id: next_id - 1 }
            })
            .collect()
    };

    let initial: Vec<Chromosome> = (0..config.population_size)
        .map(|_| {
            let picks = index::sample(&mut rng, edge_pixels.len(), 5);
            let mut points = [[0i32; 2]; 5];
            for (slot, i) in points.iter_mut().zip(picks.iter()) {
                *slot = edge_pixels[i];
            }
            Chromosome { points }
        })
        .collect();
    let mut population = evaluate(initial);
    let mut best = *population.iter().reduce(|a, b| if better(b, a) { b } else { a }).unwrap();
    let mut history = vec![best.fitness];

    for _ in 0..config.generations {
        let mut ranked: Vec<&Individual<T>> = population.iter().collect();
        ranked.sort_by(|a, b| {
            if better(a, b) {
                Ordering::Less
            } else if better(b, a) {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        });
        let elites: Vec<Individual<T>> = ranked.iter().take(config.elite_count).map(|&&i| i).collect();

        let mut offspring = Vec::with_capacity(config.population_size);
        let room = config.population_size - elites.len();
        while offspring.len() < room {
            let p1 = tournament(&population, config.tournament_size, &mut rng).genes;
            let p2 = tournament(&population, config.tournament_size, &mut rng).genes;
            let (mut c1, mut c2) = if rng.random_bool(config.crossover_rate) {
                let cut = rng.random_range(1..5);
                (crossover(&p1, &p2, cut), crossover(&p2, &p1, cut))
            } else {
                (p1, p2)
            };
            mutate(&mut c1, config.mutation_rate, &normal, w, h, &mut rng);
            mutate(&mut c2, config.mutation_rate, &normal, w, h, &mut rng);
            offspring.push(c1);
            if offspring.len() < room {
                offspring.push(c2);
            }
        }

        let mut next = elites;
        next.extend(evaluate(offspring));
        for ind in &next {
            if better(ind, &best) {
                best = *ind;
            }
        }
        history.push(best.fitness);
        population = next;
    }

    Ok(GaFit {
        conic: best.genes.decode()?,
        fitness: best.fitness,
        chromosome: best.genes,
        best_per_generation: history,
    })
}

fn tournament<'a, T: Real>(population: &'a [Individual<T>], size: usize, rng: &mut ChaCha8Rng) -> &'a Individual<T> {
    let mut winner = &population[rng.random_range(0..population.len())];
    for _ in 1..size {
        let challenger = &population[rng.random_range(0..population.len())];
        if better(challenger, winner) {
            winner = challenger;
        }
    }
    winner
}

/// Single-point crossover at a point-pair boundary. A child that would repeat
/// a point falls back to a copy of its first parent.
fn crossover(first: &Chromosome, second: &Chromosome, cut: usize) -> Chromosome {
    let mut points = first.points;
    points[cut..].copy_from_slice(&second.points[cut..]);
    let child = Chromosome { points };
    if child.has_duplicates() {
        *first
    } else {
        child
    }
}

fn mutate(c: &mut Chromosome, rate: f64, normal: &Normal<f64>, width: usize, height: usize, rng: &mut ChaCha8Rng) {
    for i in 0..5 {
        if !rng.random_bool(rate) {
            continue;
        }
        let dx = normal.sample(rng);
        let dy = normal.sample(rng);
        let old = c.points[i];
        let nx = (old[0] as f64 + dx).round().clamp(0.0, (width - 1) as f64) as i32;
        let ny = (old[1] as f64 + dy).round().clamp(0.0, (height - 1) as f64) as i32;
        c.points[i] = [nx, ny];
        if c.has_duplicates() {
            c.points[i] = old;
        }
    }
}
