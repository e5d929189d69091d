//! NSGA-II over chromosomes made of one level mask per classifier input plus
//! a decimal-point position, minimizing `(1 - accuracy, transistor count)`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adc::LevelMask;
use crate::error::{Error, Result};

pub type Objectives = [f64; 2];

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chromosome {
    pub masks: Vec<LevelMask>,
    pub dpos: u32,
}

impl Chromosome {
    pub fn mask_bits(&self) -> usize {
        self.masks.iter().map(|m| m.bits().len()).sum()
    }

    /// Mask bits plus the decimal-point gene.
    pub fn len(&self) -> usize {
        self.mask_bits() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    fn same_shape(&self, other: &Chromosome) -> bool {
        self.masks.len() == other.masks.len()
            && self.masks.iter().zip(&other.masks).all(|(a, b)| a.n_bits() == b.n_bits())
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let masks: Vec<String> = self.masks.iter().map(|m| format!("0x{}", m.to_hex())).collect();
        write!(f, "[{}] dpos={}", masks.join(","), self.dpos)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub chromosome: Chromosome,
    pub objectives: Option<Objectives>,
    pub rank: Option<usize>,
    pub crowding: f64,
    pub id: u64,
    pub generation: usize,
}

impl Individual {
    pub fn new(chromosome: Chromosome, id: u64, generation: usize) -> Self {
        Self {
            chromosome,
            objectives: None,
            rank: None,
            crowding: 0.0,
            id,
            generation,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossoverKind {
    #[default]
    Uniform,
    OnePoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-individual probability that mutation happens at all.
    pub mutation_prob: f64,
    /// Interpret both probabilities as percentages.
    pub rates_in_percent: bool,
    /// Per-gene flip rate once mutation triggers; defaults to
    /// `1 / chromosome length`.
    pub bit_flip_rate: Option<f64>,
    pub tournament: usize,
    pub crossover: CrossoverKind,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 25,
            crossover_prob: 0.7,
            mutation_prob: 0.2,
            rates_in_percent: false,
            bit_flip_rate: None,
            tournament: 2,
            crossover: CrossoverKind::Uniform,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Error::Config {
            path: format!("ga.{path}"),
            message,
        };
        if self.population < 2 || self.population % 2 != 0 {
            return Err(bad("population", format!("must be even and >= 2, got {}", self.population)));
        }
        if self.tournament < 1 {
            return Err(bad("tournament", "must be >= 1".into()));
        }
        let scale = if self.rates_in_percent { 100.0 } else { 1.0 };
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=scale).contains(&p) {
                return Err(bad(name, format!("{p} outside [0, {scale}]")));
            }
        }
        if let Some(r) = self.bit_flip_rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(bad("bit_flip_rate", format!("{r} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn crossover_rate(&self) -> f64 {
        self.scaled(self.crossover_prob)
    }

    pub fn mutation_rate(&self) -> f64 {
        self.scaled(self.mutation_prob)
    }

    fn scaled(&self, p: f64) -> f64 {
        if self.rates_in_percent {
            p / 100.0
        } else {
            p
        }
    }
}

/// Shape of the search space: one `n_bits` mask per input and a
/// decimal-point gene in `0..=max_dpos`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchSpace {
    pub n_inputs: usize,
    pub n_bits: u32,
    pub max_dpos: u32,
}

impl SearchSpace {
    pub fn random(&self, rng: &mut impl Rng) -> Chromosome {
        let levels = 1usize << self.n_bits;
        Chromosome {
            masks: (0..self.n_inputs)
                .map(|_| repair(self.n_bits, (0..levels).map(|_| rng.random_bool(0.5)).collect()))
                .collect(),
            dpos: rng.random_range(0..=self.max_dpos),
        }
    }

    fn fits(&self, c: &Chromosome) -> bool {
        c.masks.len() == self.n_inputs
            && c.masks.iter().all(|m| m.n_bits() == self.n_bits)
            && c.dpos <= self.max_dpos
    }
}

pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Deb's fast non-dominated sort. Front members are listed in index order.
pub fn fast_non_dominated_sort<O: AsRef<[f64]>>(objectives: &[O]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            let (a, b) = (objectives[p].as_ref(), objectives[q].as_ref());
            if dominates(a, b) {
                dominated_by[p].push(q);
            } else if dominates(b, a) {
                domination_count[p] += 1;
            }
        }
        if domination_count[p] == 0 {
            current.push(p);
        }
    }
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of every member of one front.
pub fn crowding_distance<O: AsRef<[f64]>>(front: &[O]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].as_ref().len();
    for k in 0..m {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| front[a].as_ref()[k].total_cmp(&front[b].as_ref()[k]).then(a.cmp(&b)));
        let lo = front[order[0]].as_ref()[k];
        let hi = front[order[n - 1]].as_ref()[k];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            let gap = front[w[2]].as_ref()[k] - front[w[0]].as_ref()[k];
            dist[w[1]] += gap / range;
        }
    }
    dist
}

/// Crowded-comparison order: lower rank first, then larger crowding distance.
pub fn crowded_cmp(a: &Individual, b: &Individual) -> Result<Ordering> {
    let rank = |i: &Individual| {
        i.rank
            .ok_or_else(|| Error::Contract(format!("individual {} has not been ranked", i.id)))
    };
    Ok(rank(a)?
        .cmp(&rank(b)?)
        .then_with(|| b.crowding.total_cmp(&a.crowding)))
}

/// Binary (or k-ary) tournament; ties on the crowded comparison are settled
/// by a fair coin.
pub fn tournament_select(population: &[Individual], size: usize, rng: &mut impl Rng) -> Result<usize> {
    if population.is_empty() {
        return Err(Error::Empty("population"));
    }
    let mut best = rng.random_range(0..population.len());
    for _ in 1..size.max(1) {
        let challenger = rng.random_range(0..population.len());
        best = match crowded_cmp(&population[challenger], &population[best])? {
            Ordering::Less => challenger,
            Ordering::Greater => best,
            Ordering::Equal => {
                if rng.random_bool(0.5) {
                    challenger
                } else {
                    best
                }
            }
        };
    }
    Ok(best)
}

/// Sets the lowest-index unset bits until at least two levels are kept.
pub fn repair(n_bits: u32, mut bits: Vec<bool>) -> LevelMask {
    let mut kept = bits.iter().filter(|&&b| b).count();
    for b in bits.iter_mut() {
        if kept >= 2 {
            break;
        }
        if !*b {
            *b = true;
            kept += 1;
        }
    }
    LevelMask::new(n_bits, bits).expect("repaired mask keeps two levels")
}

fn split_bits(shape: &Chromosome, flat: &[bool]) -> Vec<LevelMask> {
    let mut offset = 0;
    shape
        .masks
        .iter()
        .map(|m| {
            let len = m.bits().len();
            let mask = repair(m.n_bits(), flat[offset..offset + len].to_vec());
            offset += len;
            mask
        })
        .collect()
}

fn flat_bits(c: &Chromosome) -> Vec<bool> {
    c.masks.iter().flat_map(|m| m.bits().iter().copied()).collect()
}

pub fn crossover(
    a: &Chromosome,
    b: &Chromosome,
    cfg: &GaConfig,
    rng: &mut impl Rng,
) -> Result<(Chromosome, Chromosome)> {
    if !a.same_shape(b) {
        return Err(Error::invalid("crossover parents have different shapes"));
    }
    if !rng.random_bool(cfg.crossover_rate().clamp(0.0, 1.0)) {
        return Ok((a.clone(), b.clone()));
    }
    let (mut x, mut y) = (flat_bits(a), flat_bits(b));
    match cfg.crossover {
        CrossoverKind::Uniform => {
            for (p, q) in x.iter_mut().zip(y.iter_mut()) {
                if rng.random_bool(0.5) {
                    std::mem::swap(p, q);
                }
            }
        }
        CrossoverKind::OnePoint => {
            let cut = rng.random_range(1..x.len().max(2));
            for i in cut.min(x.len())..x.len() {
                std::mem::swap(&mut x[i], &mut y[i]);
            }
        }
    }
    let (mut da, mut db) = (a.dpos, b.dpos);
    if rng.random_bool(0.5) {
        std::mem::swap(&mut da, &mut db);
    }
    Ok((
        Chromosome {
            masks: split_bits(a, &x),
            dpos: da,
        },
        Chromosome {
            masks: split_bits(b, &y),
            dpos: db,
        },
    ))
}

pub fn mutate(c: &Chromosome, cfg: &GaConfig, max_dpos: u32, rng: &mut impl Rng) -> Chromosome {
    if !rng.random_bool(cfg.mutation_rate().clamp(0.0, 1.0)) {
        return c.clone();
    }
    let rate = cfg.bit_flip_rate.unwrap_or(1.0 / c.len() as f64);
    let mut bits = flat_bits(c);
    for b in bits.iter_mut() {
        if rng.random_bool(rate) {
            *b = !*b;
        }
    }
    let dpos = if rng.random_bool(rate) {
        rng.random_range(0..=max_dpos)
    } else {
        c.dpos
    };
    Chromosome {
        masks: split_bits(c, &bits),
        dpos,
    }
}

/// Assigns ranks and crowding distances in place and returns the fronts.
pub fn rank_population(pop: &mut [Individual]) -> Result<Vec<Vec<usize>>> {
    let objs = pop
        .iter()
        .map(|i| {
            i.objectives
                .ok_or_else(|| Error::Contract(format!("individual {} has not been evaluated", i.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let fronts = fast_non_dominated_sort(&objs);
    for (rank, front) in fronts.iter().enumerate() {
        let members: Vec<Objectives> = front.iter().map(|&i| objs[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&members)) {
            pop[i].rank = Some(rank);
            pop[i].crowding = d;
        }
    }
    Ok(fronts)
}

/// Elitist truncation of `combined` down to `size` individuals.
fn environmental_selection(mut combined: Vec<Individual>, size: usize) -> Result<Vec<Individual>> {
    let fronts = rank_population(&mut combined)?;
    let mut keep: Vec<usize> = Vec::with_capacity(size);
    for front in fronts {
        if keep.len() + front.len() <= size {
            keep.extend(front);
        } else {
            let mut rest = front;
            rest.sort_by(|&a, &b| combined[b].crowding.total_cmp(&combined[a].crowding).then(a.cmp(&b)));
            keep.extend(rest.into_iter().take(size - keep.len()));
        }
        if keep.len() == size {
            break;
        }
    }
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    let mut next: Vec<Individual> = keep.into_iter().map(|i| slots[i].take().expect("unique index")).collect();
    rank_population(&mut next)?;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_error: f64,
    pub best_area: f64,
    pub archive_size: usize,
}

#[derive(Clone, Debug)]
pub struct GaResult {
    pub population: Vec<Individual>,
    /// Mutually non-dominated subset of every evaluated point, sorted by
    /// area, then error, then id.
    pub archive: Vec<Individual>,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
}

fn update_archive(archive: &mut Vec<Individual>, candidates: &[Individual]) {
    for cand in candidates {
        let c = cand.objectives.expect("evaluated");
        let covered = archive.iter().any(|a| {
            let o = a.objectives.expect("evaluated");
            dominates(&o, &c) || o == c
        });
        if covered {
            continue;
        }
        archive.retain(|a| !dominates(&c, &a.objectives.expect("evaluated")));
        archive.push(cand.clone());
    }
    archive.sort_by(|a, b| {
        let (oa, ob) = (a.objectives.expect("evaluated"), b.objectives.expect("evaluated"));
        oa[1].total_cmp(&ob[1]).then(oa[0].total_cmp(&ob[0])).then(a.id.cmp(&b.id))
    });
}

struct Evaluation<'a, F> {
    evaluator: &'a F,
    cache: HashMap<Chromosome, Objectives>,
    pool: rayon::ThreadPool,
    count: usize,
}

impl<F> Evaluation<'_, F>
where
    F: Fn(&Chromosome) -> Result<Objectives> + Sync,
{
    fn run(&mut self, inds: &mut [Individual]) -> Result<()> {
        let mut pending: Vec<Chromosome> = Vec::new();
        for ind in inds.iter() {
            if !self.cache.contains_key(&ind.chromosome) && !pending.contains(&ind.chromosome) {
                pending.push(ind.chromosome.clone());
            }
        }
        let eval = self.evaluator;
        let results: Vec<Result<Objectives>> = self
            .pool
            .install(|| pending.par_iter().map(|c| eval(c)).collect());
        for (c, r) in pending.into_iter().zip(results) {
            let wrap = |source: Error| Error::Evaluation {
                chromosome: c.to_string(),
                source: Box::new(source),
            };
            let obj = r.map_err(wrap)?;
            if obj.iter().any(|v| !v.is_finite()) {
                return Err(wrap(Error::Contract(format!("non-finite objectives {obj:?}"))));
            }
            self.count += 1;
            self.cache.insert(c, obj);
        }
        for ind in inds.iter_mut() {
            ind.objectives = Some(self.cache[&ind.chromosome]);
        }
        Ok(())
    }
}

/// Runs the generational loop. `seeds` are injected into the initial
/// population before it is topped up with random chromosomes. Evaluations
/// within a generation run on `workers` threads; results do not depend on the
/// worker count as long as `evaluator` is a pure function of the chromosome.
pub fn run<F>(
    cfg: &GaConfig,
    space: &SearchSpace,
    seeds: &[Chromosome],
    workers: usize,
    evaluator: F,
) -> Result<GaResult>
where
    F: Fn(&Chromosome) -> Result<Objectives> + Sync,
{
    cfg.validate()?;
    if let Some(bad) = seeds.iter().find(|c| !space.fits(c)) {
        return Err(Error::invalid(format!("seed chromosome {bad} does not fit the search space")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let mut eval = Evaluation {
        evaluator: &evaluator,
        cache: HashMap::new(),
        pool,
        count: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut next_id = 0u64;
    let mut fresh = |c: Chromosome, generation: usize| {
        let ind = Individual::new(c, next_id, generation);
        next_id += 1;
        ind
    };

    let mut population: Vec<Individual> = seeds
        .iter()
        .take(cfg.population)
        .cloned()
        .map(|c| fresh(c, 0))
        .collect();
    while population.len() < cfg.population {
        let c = space.random(&mut rng);
        population.push(fresh(c, 0));
    }
    eval.run(&mut population)?;
    rank_population(&mut population)?;

    let mut archive = Vec::new();
    update_archive(&mut archive, &population);
    let stats = |generation: usize, archive: &[Individual]| GenerationStats {
        generation,
        best_error: archive.iter().map(|i| i.objectives.unwrap()[0]).fold(f64::INFINITY, f64::min),
        best_area: archive.iter().map(|i| i.objectives.unwrap()[1]).fold(f64::INFINITY, f64::min),
        archive_size: archive.len(),
    };
    let mut history = vec![stats(0, &archive)];

    for generation in 1..=cfg.generations {
        let mut offspring = Vec::with_capacity(cfg.population);
        while offspring.len() < cfg.population {
            let pa = tournament_select(&population, cfg.tournament, &mut rng)?;
            let pb = tournament_select(&population, cfg.tournament, &mut rng)?;
            let (ca, cb) = crossover(&population[pa].chromosome, &population[pb].chromosome, cfg, &mut rng)?;
            for child in [ca, cb] {
                let m = mutate(&child, cfg, space.max_dpos, &mut rng);
                offspring.push(fresh(m, generation));
            }
        }
        offspring.truncate(cfg.population);
        eval.run(&mut offspring)?;
        update_archive(&mut archive, &offspring);
        let mut combined = population;
        combined.extend(offspring);
        population = environmental_selection(combined, cfg.population)?;
        history.push(stats(generation, &archive));
    }

    Ok(GaResult {
        population,
        archive,
        history,
        evaluations: eval.count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_fronts(objs: &[Objectives]) -> Vec<Vec<usize>> {
        let mut remaining: Vec<usize> = (0..objs.len()).collect();
        let mut fronts = Vec::new();
        while !remaining.is_empty() {
            let front: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&p| !remaining.iter().any(|&q| dominates(&objs[q], &objs[p])))
                .collect();
            remaining.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    #[test]
    fn sort_examples() {
        assert_eq!(
            fast_non_dominated_sort(&[[0.1, 10.0], [0.2, 5.0], [0.3, 20.0]]),
            vec![vec![0, 1], vec![2]]
        );
        assert_eq!(fast_non_dominated_sort(&[[0.5, 1.0]]), vec![vec![0]]);
        assert_eq!(fast_non_dominated_sort(&[[0.5, 1.0], [0.5, 1.0]]), vec![vec![0, 1]]);
        assert!(fast_non_dominated_sort::<Objectives>(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn sort_matches_brute_force(objs in prop::collection::vec((0u8..8, 0u8..8), 1..40)) {
            let objs: Vec<Objectives> = objs.into_iter().map(|(a, b)| [a as f64, b as f64]).collect();
            prop_assert_eq!(fast_non_dominated_sort(&objs), brute_force_fronts(&objs));
        }
    }

    #[test]
    fn crowding_examples() {
        assert_eq!(crowding_distance(&[[0.0, 1.0], [1.0, 0.0]]), vec![f64::INFINITY; 2]);
        let d = crowding_distance(&[[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert_eq!(d[1], 2.0);
        let d = crowding_distance(&[[1.0, 1.0]; 4]);
        assert_eq!(d.iter().filter(|x| x.is_infinite()).count(), 2);
        assert_eq!(d.iter().filter(|&&x| x == 0.0).count(), 2);
    }

    fn ranked(rank: usize, crowding: f64) -> Individual {
        let c = Chromosome {
            masks: vec![LevelMask::full(2).unwrap()],
            dpos: 0,
        };
        Individual {
            rank: Some(rank),
            crowding,
            objectives: Some([0.0, 0.0]),
            ..Individual::new(c, 0, 0)
        }
    }

    #[test]
    fn tournament_prefers_rank_then_crowding() {
        assert_eq!(crowded_cmp(&ranked(0, 0.1), &ranked(1, 9.0)).unwrap(), Ordering::Less);
        assert_eq!(
            crowded_cmp(&ranked(2, f64::INFINITY), &ranked(2, 0.3)).unwrap(),
            Ordering::Less
        );
        let unranked = Individual { rank: None, ..ranked(0, 0.0) };
        assert!(matches!(crowded_cmp(&unranked, &ranked(0, 0.0)), Err(Error::Contract(_))));

        // the worse individual only wins when it is drawn twice
        let pop = [ranked(0, 0.1), ranked(1, f64::INFINITY)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trials = 20_000;
        let worse = (0..trials)
            .filter(|_| tournament_select(&pop, 2, &mut rng).unwrap() == 1)
            .count();
        let freq = worse as f64 / trials as f64;
        assert!((freq - 0.25).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn tournament_coin_is_fair() {
        let pop = [ranked(0, 0.5), ranked(0, 0.5)];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 10_000;
        let zero = (0..trials)
            .filter(|_| tournament_select(&pop, 2, &mut rng).unwrap() == 0)
            .count();
        let freq = zero as f64 / trials as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn repair_rules() {
        assert_eq!(repair(2, vec![false; 4]).kept_codes(), vec![0, 1]);
        assert_eq!(repair(2, vec![false, false, false, true]).kept_codes(), vec![0, 3]);
        let valid = vec![false, true, false, true];
        assert_eq!(repair(2, valid.clone()).bits(), valid.as_slice());
    }

    fn chrom(hex: &[&str], n: u32, dpos: u32) -> Chromosome {
        Chromosome {
            masks: hex.iter().map(|h| LevelMask::from_hex(n, h).unwrap()).collect(),
            dpos,
        }
    }

    #[test]
    fn crossover_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = chrom(&["f0", "0f"], 3, 1);
        let b = chrom(&["0f", "f0"], 3, 6);
        let never = GaConfig {
            crossover_prob: 0.0,
            ..GaConfig::default()
        };
        assert_eq!(crossover(&a, &b, &never, &mut rng).unwrap(), (a.clone(), b.clone()));

        let always = GaConfig {
            crossover_prob: 1.0,
            ..GaConfig::default()
        };
        let full = chrom(&["ff", "ff"], 3, 2);
        let (x, y) = crossover(&full, &full, &always, &mut rng).unwrap();
        assert_eq!((x, y), (full.clone(), full.clone()));

        for _ in 0..1000 {
            let (x, y) = crossover(&a, &b, &always, &mut rng).unwrap();
            for ((mx, my), (ma, mb)) in x.masks.iter().zip(&y.masks).zip(a.masks.iter().zip(&b.masks)) {
                for i in 0..8 {
                    let covered = mx.bits()[i] || my.bits()[i];
                    assert!(covered || !(ma.bits()[i] || mb.bits()[i]));
                }
            }
            assert!([1, 6].contains(&x.dpos) && x.dpos + y.dpos == 7);
        }

        let other = chrom(&["ff"], 3, 0);
        assert!(crossover(&a, &other, &always, &mut rng).is_err());
    }

    #[test]
    fn one_point_crossover_keeps_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = GaConfig {
            crossover_prob: 1.0,
            crossover: CrossoverKind::OnePoint,
            ..GaConfig::default()
        };
        let a = chrom(&["ff", "ff"], 3, 1);
        let b = chrom(&["81", "18"], 3, 2);
        for _ in 0..100 {
            let (x, y) = crossover(&a, &b, &cfg, &mut rng).unwrap();
            assert!(x.same_shape(&a) && y.same_shape(&b));
        }
    }

    #[test]
    fn mutation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = chrom(&["5a"], 3, 4);
        let off = GaConfig {
            mutation_prob: 0.0,
            ..GaConfig::default()
        };
        assert_eq!(mutate(&c, &off, 7, &mut rng), c);

        let all = GaConfig {
            mutation_prob: 1.0,
            bit_flip_rate: Some(1.0),
            ..GaConfig::default()
        };
        let m = mutate(&c, &all, 7, &mut rng);
        assert_eq!(m.masks[0].to_hex(), "a5");

        // complement of 0xfe keeps only code 0; repair adds code 1
        let c = chrom(&["fe"], 3, 4);
        let m = mutate(&c, &all, 7, &mut rng);
        assert_eq!(m.masks[0].kept_codes(), vec![0, 1]);
    }

    #[test]
    fn percent_rates_are_scaled() {
        let cfg = GaConfig {
            crossover_prob: 0.7,
            mutation_prob: 0.2,
            rates_in_percent: true,
            ..GaConfig::default()
        };
        assert!((cfg.crossover_rate() - 0.007).abs() < 1e-15);
        assert!((cfg.mutation_rate() - 0.002).abs() < 1e-15);
        assert!(GaConfig { population: 7, ..GaConfig::default() }.validate().is_err());
    }

    fn popcount_space(n_bits: u32) -> SearchSpace {
        SearchSpace {
            n_inputs: 1,
            n_bits,
            max_dpos: 7,
        }
    }

    fn kept_fraction(c: &Chromosome) -> f64 {
        let m = &c.masks[0];
        m.kept_count() as f64 / m.bits().len() as f64
    }

    #[test]
    fn converges_to_minimal_masks() {
        let cfg = GaConfig {
            population: 20,
            generations: 25,
            seed: 4,
            ..GaConfig::default()
        };
        let space = SearchSpace {
            n_inputs: 3,
            n_bits: 3,
            max_dpos: 7,
        };
        let res = run(&cfg, &space, &[], 1, |c| {
            let kept: usize = c.masks.iter().map(|m| m.kept_count()).sum();
            Ok([kept as f64 / 24.0, 1.0])
        })
        .unwrap();
        let best = &res.archive[0];
        assert!(best.chromosome.masks.iter().all(|m| m.kept_count() == 2), "{}", best.chromosome);
    }

    #[test]
    fn front_spans_the_trade_off() {
        let n = 3;
        let cfg = GaConfig {
            population: 20,
            generations: 25,
            seed: 11,
            ..GaConfig::default()
        };
        let res = run(&cfg, &popcount_space(n), &[], 2, |c| {
            let f = kept_fraction(c);
            Ok([f, 1.0 - f])
        })
        .unwrap();
        let mut kept: Vec<usize> = res.archive.iter().map(|i| i.chromosome.masks[0].kept_count()).collect();
        kept.dedup();
        assert!(kept.len() >= (1 << n) - 1, "{kept:?}");
    }

    #[test]
    fn run_is_deterministic_and_elitist() {
        let cfg = GaConfig {
            population: 16,
            generations: 10,
            seed: 21,
            ..GaConfig::default()
        };
        let space = SearchSpace {
            n_inputs: 2,
            n_bits: 3,
            max_dpos: 7,
        };
        let eval = |c: &Chromosome| {
            let kept: usize = c.masks.iter().map(|m| m.kept_count()).sum();
            let spread = c.masks[0].kept_codes().last().copied().unwrap_or(0) as f64;
            Ok([1.0 / kept as f64 + 0.01 * c.dpos as f64, kept as f64 - 0.1 * spread])
        };
        let a = run(&cfg, &space, &[], 1, eval).unwrap();
        let b = run(&cfg, &space, &[], 4, eval).unwrap();
        assert_eq!(a.archive, b.archive);
        assert_eq!(a.population, b.population);
        for w in a.history.windows(2) {
            assert!(w[1].best_error <= w[0].best_error);
            assert!(w[1].best_area <= w[0].best_area);
        }
        for x in &a.archive {
            for y in &a.archive {
                assert!(!dominates(&x.objectives.unwrap(), &y.objectives.unwrap()));
            }
        }
    }

    #[test]
    fn evaluator_errors_carry_the_chromosome() {
        let cfg = GaConfig {
            population: 4,
            generations: 1,
            ..GaConfig::default()
        };
        let err = run(&cfg, &popcount_space(2), &[], 1, |_| Err(Error::invalid("boom"))).unwrap_err();
        match err {
            Error::Evaluation { chromosome, .. } => assert!(chromosome.contains("dpos=")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn seeds_enter_the_initial_population() {
        let cfg = GaConfig {
            population: 4,
            generations: 0,
            ..GaConfig::default()
        };
        let seed = chrom(&["f"], 2, 3);
        let res = run(&cfg, &popcount_space(2), std::slice::from_ref(&seed), 1, |c| {
            Ok([kept_fraction(c), 0.0])
        })
        .unwrap();
        assert!(res.population.iter().any(|i| i.chromosome == seed && i.id == 0));
    }
}
