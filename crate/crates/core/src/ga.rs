//! Real-coded genetic algorithm over `(W, θ)` with penalized-EE fitness.
//!
//! Genome layout: `Re W` row-major, `Im W` row-major, then the `I` phases.
//! Every genome is repaired before it is scored (rows scaled onto the power
//! budget, angles wrapped), and the repaired genome is what survives.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::beam::project_row_power;
use crate::channel::{complex_normal, wrap_angle, ChannelSet, PhaseVector};
use crate::config::ScenarioConfig;
use crate::metrics::{penalized_objective, BeamMatrix, SolverFlags, Solution};

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_prob: f64,
    /// Mutation std of a `W` gene, relative to `sqrt(P_max)`.
    pub beam_mutation: f64,
    /// Mutation std of a phase gene, radians.
    pub phase_mutation: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 200,
            tournament: 2,
            crossover_prob: 0.5,
            beam_mutation: 0.05,
            phase_mutation: 0.1,
            elitism: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GaConfigError {
    #[error("population must be at least 2")]
    Population,
    #[error("elitism must be between 1 and the population size")]
    Elitism,
    #[error("tournament size must be at least 1")]
    Tournament,
    #[error("crossover probability must lie in [0, 1]")]
    Crossover,
    #[error("mutation std must be finite and non-negative")]
    Mutation,
    #[error("initial population has {found} genomes of wrong length or count")]
    InitialPopulation { found: usize },
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaConfigError> {
        if self.population < 2 {
            return Err(GaConfigError::Population);
        }
        if self.elitism < 1 || self.elitism > self.population {
            return Err(GaConfigError::Elitism);
        }
        if self.tournament < 1 {
            return Err(GaConfigError::Tournament);
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(GaConfigError::Crossover);
        }
        for s in [self.beam_mutation, self.phase_mutation] {
            if !s.is_finite() || s < 0.0 {
                return Err(GaConfigError::Mutation);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub solution: Solution,
    pub best: Individual,
    /// Entry 0 describes the initial population.
    pub history: Vec<GenerationStats>,
}

/// Genome dimensions for a channel set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenomeLayout {
    pub num_aps: usize,
    pub num_users: usize,
    pub num_elements: usize,
}

impl GenomeLayout {
    pub fn of(channels: &ChannelSet) -> Self {
        Self {
            num_aps: channels.num_aps(),
            num_users: channels.num_users(),
            num_elements: channels.num_elements(),
        }
    }

    pub fn beam_genes(&self) -> usize {
        2 * self.num_aps * self.num_users
    }

    pub fn len(&self) -> usize {
        self.beam_genes() + self.num_elements
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn decode(&self, genome: &[f64]) -> (BeamMatrix, PhaseVector) {
        let nb = self.beam_genes();
        let w = BeamMatrix::from_genes(self.num_aps, self.num_users, &genome[..nb]);
        let v = PhaseVector::from_angles(genome[nb..].iter().copied());
        (w, v)
    }

    pub fn encode(&self, w: &BeamMatrix, v: &PhaseVector) -> Vec<f64> {
        let mut g = w.to_genes();
        g.extend_from_slice(v.angles());
        g
    }

    /// Scales `W` rows onto the power budget and wraps the angles.
    pub fn repair(&self, genome: &mut [f64], p_max: f64) {
        let nb = self.beam_genes();
        let w = BeamMatrix::from_genes(self.num_aps, self.num_users, &genome[..nb]);
        let w = project_row_power(&w, p_max);
        genome[..nb].copy_from_slice(&w.to_genes());
        for t in genome[nb..].iter_mut() {
            *t = wrap_angle(*t);
        }
    }
}

/// Penalized objective of a repaired genome.
pub fn fitness(channels: &ChannelSet, config: &ScenarioConfig, layout: &GenomeLayout, genome: &[f64]) -> f64 {
    let (w, v) = layout.decode(genome);
    let f = penalized_objective(channels, &v, &w, config);
    if f.is_nan() {
        f64::NEG_INFINITY
    } else {
        f
    }
}

/// Random genome: `W` entries `CN(0, P_max/K)`, phases uniform.
pub fn random_genome<R: Rng + ?Sized>(layout: &GenomeLayout, p_max: f64, rng: &mut R) -> Vec<f64> {
    let scale = (p_max / layout.num_users.max(1) as f64).sqrt();
    let w = BeamMatrix(crate::linalg::CMatrix::from_fn(layout.num_aps, layout.num_users, |_, _| {
        complex_normal(rng) * scale
    }));
    let v = PhaseVector::random(layout.num_elements, rng);
    layout.encode(&w, &v)
}

fn tournament<R: Rng + ?Sized>(pop: &[Individual], size: usize, rng: &mut R) -> usize {
    let mut winner = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if pop[c].fitness > pop[winner].fitness {
            winner = c;
        }
    }
    winner
}

/// Indices sorted by fitness, best first; ties keep population order.
fn ranking(pop: &[Individual]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| pop[b].fitness.total_cmp(&pop[a].fitness));
    idx
}

fn stats(generation: usize, pop: &[Individual], best: f64) -> GenerationStats {
    let finite: Vec<f64> = pop.iter().map(|i| i.fitness).filter(|f| f.is_finite()).collect();
    let mean = if finite.is_empty() {
        f64::NEG_INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    GenerationStats { generation, best, mean }
}

/// Runs the GA from a random initial population.
pub fn run_ga(channels: &ChannelSet, config: &ScenarioConfig, ga: &GaConfig) -> Result<Solution, GaConfigError> {
    run_ga_detailed(channels, config, ga, None, &mut |genomes: &[Vec<f64>]| {
        let layout = GenomeLayout::of(channels);
        genomes.iter().map(|g| fitness(channels, config, &layout, g)).collect()
    })
    .map(|o| o.solution)
}

/// Full GA with an optional initial population and a batch fitness callback.
///
/// `score` receives repaired genomes and must return one fitness per genome
/// equal to [`fitness`]; it exists so callers can evaluate a batch in
/// parallel.
pub fn run_ga_detailed(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    ga: &GaConfig,
    initial: Option<Vec<Vec<f64>>>,
    score: &mut dyn FnMut(&[Vec<f64>]) -> Vec<f64>,
) -> Result<GaOutcome, GaConfigError> {
    ga.validate()?;
    let layout = GenomeLayout::of(channels);
    let mut rng = ChaCha8Rng::seed_from_u64(ga.seed);

    let mut genomes = match initial {
        Some(g) => {
            if g.len() != ga.population || g.iter().any(|x| x.len() != layout.len()) {
                return Err(GaConfigError::InitialPopulation { found: g.len() });
            }
            g
        }
        None => (0..ga.population).map(|_| random_genome(&layout, config.p_max, &mut rng)).collect(),
    };
    for g in genomes.iter_mut() {
        layout.repair(g, config.p_max);
    }
    let scores = score(&genomes);
    let mut pop: Vec<Individual> = genomes
        .into_iter()
        .zip(scores)
        .map(|(genome, fitness)| Individual { genome, fitness })
        .collect();

    let mut best = pop[ranking(&pop)[0]].clone();
    let mut history = alloc::vec![stats(0, &pop, best.fitness)];

    let beam_std = ga.beam_mutation * config.p_max.sqrt();
    let beam_noise = Normal::new(0.0, beam_std).expect("validated std");
    let phase_noise = Normal::new(0.0, ga.phase_mutation).expect("validated std");
    let nb = layout.beam_genes();

    for generation in 1..=ga.generations {
        let order = ranking(&pop);
        let mut next: Vec<Vec<f64>> = order.iter().take(ga.elitism).map(|&i| pop[i].genome.clone()).collect();
        let elite = next.len();
        while next.len() < ga.population {
            let a = tournament(&pop, ga.tournament, &mut rng);
            let b = tournament(&pop, ga.tournament, &mut rng);
            let mut child = pop[a].genome.clone();
            if rng.random::<f64>() < ga.crossover_prob {
                for (gene, other) in child.iter_mut().zip(&pop[b].genome) {
                    if rng.random::<bool>() {
                        *gene = *other;
                    }
                }
            }
            for (i, gene) in child.iter_mut().enumerate() {
                let noise = if i < nb { beam_noise.sample(&mut rng) } else { phase_noise.sample(&mut rng) };
                *gene += noise;
            }
            layout.repair(&mut child, config.p_max);
            next.push(child);
        }
        let fresh = score(&next[elite..]);
        let mut new_pop: Vec<Individual> = Vec::with_capacity(ga.population);
        for (slot, genome) in next.into_iter().enumerate() {
            let fitness = if slot < elite { pop[order[slot]].fitness } else { fresh[slot - elite] };
            new_pop.push(Individual { genome, fitness });
        }
        pop = new_pop;
        let gen_best = ranking(&pop)[0];
        if pop[gen_best].fitness > best.fitness {
            best = pop[gen_best].clone();
        }
        history.push(stats(generation, &pop, best.fitness));
    }

    let (w, v) = layout.decode(&best.genome);
    let mut solution = Solution::evaluate(channels, w, v, config);
    solution.trace = history.iter().map(|h| h.best).collect();
    solution.flags = SolverFlags {
        converged: true,
        outer_iterations: ga.generations,
        ..SolverFlags::default()
    };
    Ok(GaOutcome { solution, best, history })
}
