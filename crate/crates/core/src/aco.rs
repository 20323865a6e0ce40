//! Ant colony search over layer sequences with a growing depth schedule.
//!
//! Ants walk a layer-transition graph from a virtual input node. At each
//! slot an ant picks the next layer kind from the transitions legal after
//! its predecessor, then picks each attribute of that kind. Both choices use
//! [`select_component`]: argmax pheromone with probability `greediness`,
//! roulette selection otherwise. Transition pheromone is keyed by slot
//! depth; attribute pheromone is shared across depths.

use crate::arch::{layer_output, pool_underflows, Architecture, LayerKind, LayerSpec, Shape};
use crate::eval::{evaluate_all, Evaluator, FitnessReport};
use crate::rng::{derive_seed, substream, tag};
use crate::search::{mean, AcoRow, History, SearchContext, SearchError, SearchResult};
use crate::space::{SpaceConfig, SpaceError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcoConfig {
    pub ants: usize,
    /// Training budget of each candidate.
    pub epochs_candidate: u32,
    pub max_depth: usize,
    pub greediness: f64,
    pub pheromone_start: f64,
    pub pheromone_decay: f64,
    pub pheromone_evaporation: f64,
    #[serde(default = "SpaceConfig::aco_default")]
    pub space: SpaceConfig,
    #[serde(default)]
    pub seed: u64,
}

impl AcoConfig {
    /// 8 ants, 30 epochs per candidate.
    pub fn preset_a() -> Self {
        Self {
            ants: 8,
            epochs_candidate: 30,
            max_depth: 20,
            greediness: 0.5,
            pheromone_start: 0.1,
            pheromone_decay: 0.1,
            pheromone_evaporation: 0.1,
            space: SpaceConfig::aco_default(),
            seed: 0,
        }
    }

    /// 16 ants, 15 epochs per candidate.
    pub fn preset_b() -> Self {
        Self {
            ants: 16,
            epochs_candidate: 15,
            ..Self::preset_a()
        }
    }

    pub fn check(&self) -> Result<(), SpaceError> {
        self.space.check()?;
        let err = |m: &str| Err(SpaceError(m.to_owned()));
        if self.ants == 0 {
            return err("ants must be >= 1");
        }
        if self.max_depth == 0 || self.max_depth > self.space.layer_bounds.1 {
            return err("max_depth must lie in [1, max layers]");
        }
        if self.max_depth < self.space.layer_bounds.0 {
            return err("max_depth is below the minimum layer count");
        }
        if self.epochs_candidate == 0 {
            return err("epochs_candidate must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.greediness) {
            return err("greediness must lie in [0, 1]");
        }
        if !(self.pheromone_start > 0.0 && self.pheromone_start <= 1.0) {
            return err("pheromone_start must lie in (0, 1]");
        }
        for rate in [self.pheromone_decay, self.pheromone_evaporation] {
            if !(0.0..=1.0).contains(&rate) {
                return err("decay and evaporation must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn evaluation_budget(&self) -> usize {
        self.ants * self.max_depth
    }
}

/// Graph node an ant stands on: the virtual input or a placed layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Input,
    #[serde(untagged)]
    Layer(LayerKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransitionKey {
    pub depth: usize,
    pub from: Node,
    pub to: LayerKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    ConvChannels,
    ConvKernel,
    FcUnits,
    /// Values are rates in thousandths.
    DropoutRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributeKey {
    pub attribute: Attribute,
    pub value: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PheromoneKey {
    Transition(TransitionKey),
    Attribute(AttributeKey),
}

fn rate_key(rate: f64) -> u32 {
    (rate * 1000.0).round() as u32
}

/// Pheromone levels; entries never reinforced read as `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneGraph {
    start: f64,
    transitions: BTreeMap<TransitionKey, f64>,
    attributes: BTreeMap<AttributeKey, f64>,
}

#[derive(Serialize)]
struct TransitionEntry {
    depth: usize,
    from: Node,
    to: LayerKind,
    level: f64,
}

#[derive(Serialize)]
struct AttributeEntry {
    attribute: Attribute,
    value: u32,
    level: f64,
}

#[derive(Serialize)]
struct GraphDump {
    pheromone_start: f64,
    transitions: Vec<TransitionEntry>,
    attributes: Vec<AttributeEntry>,
}

impl PheromoneGraph {
    pub fn new(start: f64) -> Self {
        Self {
            start,
            transitions: BTreeMap::new(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn level(&self, key: &PheromoneKey) -> f64 {
        match key {
            PheromoneKey::Transition(k) => self.transitions.get(k),
            PheromoneKey::Attribute(k) => self.attributes.get(k),
        }
        .copied()
        .unwrap_or(self.start)
    }

    fn level_mut(&mut self, key: &PheromoneKey) -> &mut f64 {
        match key {
            PheromoneKey::Transition(k) => self.transitions.entry(*k).or_insert(self.start),
            PheromoneKey::Attribute(k) => self.attributes.entry(*k).or_insert(self.start),
        }
    }

    /// Keys that have been touched by an update.
    pub fn keys(&self) -> impl Iterator<Item = PheromoneKey> + '_ {
        self.transitions
            .keys()
            .map(|k| PheromoneKey::Transition(*k))
            .chain(self.attributes.keys().map(|k| PheromoneKey::Attribute(*k)))
    }

    pub fn levels(&self) -> impl Iterator<Item = f64> + '_ {
        self.transitions.values().chain(self.attributes.values()).copied()
    }

    /// Structured text dump of every touched entry.
    pub fn to_document(&self) -> String {
        let dump = GraphDump {
            pheromone_start: self.start,
            transitions: self
                .transitions
                .iter()
                .map(|(k, &level)| TransitionEntry {
                    depth: k.depth,
                    from: k.from,
                    to: k.to,
                    level,
                })
                .collect(),
            attributes: self
                .attributes
                .iter()
                .map(|(k, &level)| AttributeEntry {
                    attribute: k.attribute,
                    value: k.value,
                    level,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&dump).expect("dump serialization is infallible")
    }
}

/// Decisions taken by one ant and the architecture they spell out.
#[derive(Debug, Clone, PartialEq)]
pub struct AntPath {
    pub decisions: Vec<PheromoneKey>,
    pub architecture: Architecture,
}

impl AntPath {
    fn distinct_keys(&self) -> BTreeSet<PheromoneKey> {
        self.decisions.iter().copied().collect()
    }
}

/// Picks an index: argmax of `levels` (lowest index on ties) with probability
/// `greediness`, otherwise roulette selection proportional to level.
pub fn select_component<R: Rng + ?Sized>(levels: &[f64], greediness: f64, rng: &mut R) -> usize {
    assert!(!levels.is_empty(), "select_component needs at least one option");
    if levels.len() == 1 {
        return 0;
    }
    let u: f64 = rng.gen();
    if u < greediness {
        let mut best = 0;
        for (i, &l) in levels.iter().enumerate().skip(1) {
            if l > levels[best] {
                best = i;
            }
        }
        return best;
    }
    let total: f64 = levels.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    for (i, &l) in levels.iter().enumerate() {
        if target < l {
            return i;
        }
        target -= l;
    }
    levels.len() - 1
}

/// Layer kinds that may follow `last`, given the last non-normalization
/// layer `anchor` and the current feature map.
///
/// Input leads to Conv. Conv leads to any kind; pooling to anything but
/// pooling; FC only to FC or Dropout. BatchNorm and Dropout inherit their
/// anchor's options minus themselves. Pooling that would underflow is
/// dropped, as are kinds the space disables.
pub fn legal_transitions(
    last: Node,
    anchor: Node,
    current: Shape,
    space: &SpaceConfig,
) -> Vec<LayerKind> {
    use LayerKind::*;
    let base: &[LayerKind] = match anchor {
        Node::Input => &[Conv],
        Node::Layer(Conv) => &[Conv, MaxPool, AvgPool, BatchNorm, Dropout, FullyConnected],
        Node::Layer(MaxPool) | Node::Layer(AvgPool) => &[Conv, BatchNorm, Dropout, FullyConnected],
        Node::Layer(FullyConnected) => &[FullyConnected, Dropout],
        Node::Layer(BatchNorm) | Node::Layer(Dropout) => {
            unreachable!("normalization layers are never anchors")
        }
    };
    base.iter()
        .copied()
        .filter(|&k| Node::Layer(k) != last || !matches!(k, BatchNorm | Dropout))
        .filter(|&k| !(k.is_pool() && pool_underflows(current)))
        .filter(|&k| match k {
            Conv => true,
            MaxPool | AvgPool => space.layer_type_probabilities.pool > 0.0,
            FullyConnected => space.layer_type_probabilities.fc > 0.0,
            BatchNorm => space.batch_norm_enabled,
            Dropout => !space.dropout_set.is_empty(),
        })
        .collect()
}

fn choose_attribute<R: Rng + ?Sized>(
    graph: &PheromoneGraph,
    attribute: Attribute,
    values: &[u32],
    greediness: f64,
    decisions: &mut Vec<PheromoneKey>,
    rng: &mut R,
) -> u32 {
    let keys: Vec<_> = values
        .iter()
        .map(|&value| PheromoneKey::Attribute(AttributeKey { attribute, value }))
        .collect();
    let levels: Vec<_> = keys.iter().map(|k| graph.level(k)).collect();
    let i = select_component(&levels, greediness, rng);
    decisions.push(keys[i]);
    values[i]
}

/// One ant's walk of exactly `depth_limit` slots.
pub fn ant_walk<R: Rng + ?Sized>(
    graph: &PheromoneGraph,
    depth_limit: usize,
    config: &AcoConfig,
    input_shape: Shape,
    num_classes: u32,
    rng: &mut R,
) -> AntPath {
    assert!(depth_limit >= 1, "depth_limit must be >= 1");
    let space = &config.space;
    let channels = space.conv_channel_choices();
    let units = space.fc_unit_choices();
    let rates: Vec<u32> = space.dropout_set.iter().map(|&r| rate_key(r)).collect();

    let mut decisions = Vec::new();
    let mut layers = Vec::with_capacity(depth_limit);
    let (mut last, mut anchor) = (Node::Input, Node::Input);
    let mut current = input_shape;
    for depth in 0..depth_limit {
        let options = legal_transitions(last, anchor, current, space);
        let keys: Vec<_> = options
            .iter()
            .map(|&to| PheromoneKey::Transition(TransitionKey { depth, from: last, to }))
            .collect();
        let levels: Vec<_> = keys.iter().map(|k| graph.level(k)).collect();
        let pick = select_component(&levels, config.greediness, rng);
        decisions.push(keys[pick]);
        let kind = options[pick];
        let g = config.greediness;
        let layer = match kind {
            LayerKind::Conv => {
                let out_channels =
                    choose_attribute(graph, Attribute::ConvChannels, &channels, g, &mut decisions, rng);
                let kernel =
                    choose_attribute(graph, Attribute::ConvKernel, &space.kernel_set, g, &mut decisions, rng);
                LayerSpec::conv(out_channels, kernel)
            }
            LayerKind::FullyConnected => {
                LayerSpec::fc(choose_attribute(graph, Attribute::FcUnits, &units, g, &mut decisions, rng))
            }
            LayerKind::Dropout => {
                let key = choose_attribute(graph, Attribute::DropoutRate, &rates, g, &mut decisions, rng);
                let i = rates.iter().position(|&r| r == key).expect("chosen rate");
                LayerSpec::dropout(space.dropout_set[i])
            }
            LayerKind::MaxPool => LayerSpec::MaxPool,
            LayerKind::AvgPool => LayerSpec::AvgPool,
            LayerKind::BatchNorm => LayerSpec::BatchNorm,
        };
        current = layer_output(&layer, current).expect("legal transition fits its input");
        last = Node::Layer(kind);
        if !matches!(kind, LayerKind::BatchNorm | LayerKind::Dropout) {
            anchor = last;
        }
        layers.push(layer);
    }
    AntPath {
        decisions,
        architecture: Architecture::new(input_shape, num_classes, layers),
    }
}

/// Decays each key on `path` toward the start level.
pub fn local_update(graph: &mut PheromoneGraph, path: &AntPath, config: &AcoConfig) {
    let (decay, start) = (config.pheromone_decay, config.pheromone_start);
    for key in path.distinct_keys() {
        let level = graph.level_mut(&key);
        *level += decay * (start - *level);
    }
}

/// Moves each key on the best path toward its accuracy.
pub fn global_update(graph: &mut PheromoneGraph, best_path: &AntPath, fitness: f64, config: &AcoConfig) {
    let evaporation = config.pheromone_evaporation;
    let fitness = fitness.clamp(0.0, 1.0);
    for key in best_path.distinct_keys() {
        let level = graph.level_mut(&key);
        *level += evaporation * (fitness - *level);
    }
}

/// Runs the depth schedule: round `d` sends every ant on a `d`-slot walk,
/// evaluates the walks, and reinforces the round's most accurate path.
pub fn aco_run<E: Evaluator + ?Sized>(
    config: &AcoConfig,
    evaluator: &E,
    ctx: &SearchContext,
) -> Result<SearchResult, SearchError> {
    let started = Instant::now();
    let shape = ctx.dataset.input_shape();
    let classes = ctx.dataset.num_classes();
    let mut graph = PheromoneGraph::new(config.pheromone_start);
    let mut rows = Vec::with_capacity(config.max_depth);
    let mut evaluations = 0usize;
    let mut elapsed = 0.0;
    let mut best: Option<(Architecture, FitnessReport)> = None;

    for depth in 1..=config.max_depth {
        let paths: Vec<AntPath> = (0..config.ants)
            .map(|ant| {
                let mut rng = substream(config.seed, &[tag::WALK, depth as u64, ant as u64]);
                let path = ant_walk(&graph, depth, config, shape, classes, &mut rng);
                local_update(&mut graph, &path, config);
                path
            })
            .collect();
        let requests: Vec<_> = paths
            .iter()
            .enumerate()
            .map(|(ant, p)| {
                let seed = derive_seed(config.seed, &[tag::EVAL, depth as u64, ant as u64]);
                ctx.request(p.architecture.clone(), config.epochs_candidate, seed)
            })
            .collect();
        let results = evaluate_all(evaluator, &requests, ctx.workers);
        evaluations += results.len();
        let mut reports = Vec::with_capacity(results.len());
        for result in results {
            match result {
                Ok(r) => reports.push(r),
                Err(source) => {
                    return Err(SearchError {
                        source,
                        history: History::Aco(rows),
                        evaluations,
                    })
                }
            }
        }

        let mut round_best = 0;
        for (i, r) in reports.iter().enumerate() {
            elapsed += r.wall_seconds;
            if r.val_accuracy > reports[round_best].val_accuracy {
                round_best = i;
            }
        }
        let top = &reports[round_best];
        global_update(&mut graph, &paths[round_best], top.val_accuracy, config);
        let improved = match &best {
            None => true,
            Some((_, b)) => top.val_accuracy > b.val_accuracy,
        };
        if improved {
            best = Some((paths[round_best].architecture.clone(), top.clone()));
        }
        rows.push(AcoRow {
            depth,
            best_acc: best.as_ref().map(|(_, r)| r.val_accuracy).unwrap_or(f64::NAN),
            mean_acc: mean(reports.iter().map(|r| r.val_accuracy)),
            elapsed_s: elapsed,
        });
    }

    let (arch, report) = best.expect("at least one depth round");
    let seconds = started.elapsed().as_secs_f64();
    Ok(SearchResult {
        best: arch,
        search_report: report.clone(),
        final_report: report,
        history: History::Aco(rows),
        evaluations,
        search_seconds: seconds,
        total_seconds: seconds,
        pheromones: Some(graph),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SearchRng;
    use crate::space::validate;
    use rand::SeedableRng;

    const MNIST: Shape = Shape::new(28, 28, 1);

    fn walk_path(arch: Architecture, keys: Vec<PheromoneKey>) -> AntPath {
        AntPath {
            decisions: keys,
            architecture: arch,
        }
    }

    fn key(depth: usize) -> PheromoneKey {
        PheromoneKey::Transition(TransitionKey {
            depth,
            from: Node::Input,
            to: LayerKind::Conv,
        })
    }

    #[test]
    fn greedy_picks_argmax() {
        let mut rng = SearchRng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(select_component(&[0.1, 0.3, 0.2], 1.0, &mut rng), 1);
        }
        assert_eq!(select_component(&[0.2, 0.2], 1.0, &mut rng), 0);
        assert_eq!(select_component(&[0.7], 0.0, &mut rng), 0);
    }

    #[test]
    fn roulette_is_proportional() {
        let mut rng = SearchRng::seed_from_u64(2);
        let hits = (0..10_000)
            .filter(|_| select_component(&[0.1, 0.3], 0.0, &mut rng) == 1)
            .count() as f64
            / 1e4;
        assert!((hits - 0.75).abs() <= 0.02, "{hits}");
    }

    #[test]
    fn local_update_contracts_toward_start() {
        let cfg = AcoConfig::preset_a();
        let mut g = PheromoneGraph::new(0.1);
        let arch = Architecture::new(MNIST, 10, vec![LayerSpec::conv(32, 3)]);
        let path = walk_path(arch, vec![key(0)]);
        *g.level_mut(&key(0)) = 0.5;
        local_update(&mut g, &path, &cfg);
        assert!((g.level(&key(0)) - 0.46).abs() < 1e-15);

        let mut fresh = PheromoneGraph::new(0.1);
        local_update(&mut fresh, &path, &cfg);
        assert_eq!(fresh.level(&key(0)), 0.1);

        let mut prev = g.level(&key(0));
        for _ in 0..200 {
            local_update(&mut g, &path, &cfg);
            let now = g.level(&key(0));
            assert!(now <= prev && now >= 0.1);
            prev = now;
        }
        assert!((prev - 0.1).abs() < 1e-6);
    }

    #[test]
    fn global_update_contracts_toward_fitness() {
        let cfg = AcoConfig::preset_a();
        let arch = Architecture::new(MNIST, 10, vec![LayerSpec::conv(32, 3)]);
        let path = walk_path(arch, vec![key(0)]);
        let mut g = PheromoneGraph::new(0.1);
        global_update(&mut g, &path, 0.9, &cfg);
        assert!((g.level(&key(0)) - 0.18).abs() < 1e-15);

        let level = g.level(&key(0));
        global_update(&mut g, &path, level, &cfg);
        assert_eq!(g.level(&key(0)), level);

        let mut prev = level;
        for _ in 0..300 {
            global_update(&mut g, &path, 1.0, &cfg);
            let now = g.level(&key(0));
            assert!(now >= prev && now <= 1.0);
            prev = now;
        }
        assert!(prev > 0.999);
    }

    #[test]
    fn depth_one_walk_is_single_conv() {
        let cfg = AcoConfig::preset_a();
        let g = PheromoneGraph::new(cfg.pheromone_start);
        for seed in 0..50 {
            let mut rng = SearchRng::seed_from_u64(seed);
            let p = ant_walk(&g, 1, &cfg, MNIST, 10, &mut rng);
            assert_eq!(p.architecture.len(), 1);
            assert_eq!(p.architecture.layers[0].kind(), LayerKind::Conv);
            // transition + two attributes
            assert_eq!(p.decisions.len(), 3);
        }
    }

    #[test]
    fn deep_walks_validate() {
        let cfg = AcoConfig::preset_b();
        let g = PheromoneGraph::new(cfg.pheromone_start);
        for seed in 0..300 {
            let mut rng = SearchRng::seed_from_u64(seed);
            let p = ant_walk(&g, 20, &cfg, MNIST, 10, &mut rng);
            assert_eq!(p.architecture.len(), 20);
            let report = validate(&p.architecture, &cfg.space);
            assert!(report.valid, "{}: {:?}", p.architecture, report.violations);
        }
    }

    #[test]
    fn no_doubled_normalization() {
        let space = SpaceConfig::aco_default();
        let after_bn = legal_transitions(
            Node::Layer(LayerKind::BatchNorm),
            Node::Layer(LayerKind::Conv),
            MNIST,
            &space,
        );
        assert!(!after_bn.contains(&LayerKind::BatchNorm));
        assert!(after_bn.contains(&LayerKind::Dropout));
        let after_fc = legal_transitions(
            Node::Layer(LayerKind::FullyConnected),
            Node::Layer(LayerKind::FullyConnected),
            MNIST,
            &space,
        );
        assert_eq!(after_fc, vec![LayerKind::FullyConnected, LayerKind::Dropout]);
        let tiny = legal_transitions(
            Node::Layer(LayerKind::Conv),
            Node::Layer(LayerKind::Conv),
            Shape::new(1, 1, 8),
            &space,
        );
        assert!(!tiny.iter().any(|k| k.is_pool()));
    }

    #[test]
    fn dump_is_structured() {
        let cfg = AcoConfig::preset_a();
        let mut g = PheromoneGraph::new(0.1);
        let arch = Architecture::new(MNIST, 10, vec![LayerSpec::conv(32, 3)]);
        let path = walk_path(
            arch,
            vec![
                key(0),
                PheromoneKey::Attribute(AttributeKey {
                    attribute: Attribute::ConvChannels,
                    value: 32,
                }),
            ],
        );
        global_update(&mut g, &path, 1.0, &cfg);
        let doc: serde_json::Value = serde_json::from_str(&g.to_document()).unwrap();
        assert_eq!(doc["transitions"][0]["from"], "input");
        assert_eq!(doc["transitions"][0]["to"], "conv");
        assert_eq!(doc["attributes"][0]["attribute"], "conv_channels");
    }
}
