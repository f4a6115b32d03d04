//! Retrieval evaluation: Top-n accuracy, the benchmark runner and seeded
//! synthetic datasets shaped like the movie, animal and defect experiments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::decision::{Action, CompareOp, RuleBook, Threshold};
use crate::embed::{embed_text, EmbedError, EmbeddingProvider, ScoredContext, VectorIndex};
use crate::extract::{ingest_catalog, Catalog, CatalogDefect, ExtractError, KnowledgeStores, RuleSpec};
use crate::graph::{Graph, GraphError, NodeKind, PropValue, Props};
use crate::media::MediaStore;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no cases to evaluate")]
    EmptyCases,
    #[error("n must be at least 1")]
    ZeroN,
    #[error("index is empty")]
    EmptyIndex,
    #[error("unknown dataset `{0}` (expected movie, animal or defect)")]
    UnknownDataset(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

/// 1-based rank of the ground truth, or a miss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Hit(usize),
    Miss,
}

impl Serialize for Rank {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Rank::Hit(n) => s.serialize_u64(*n as u64),
            Rank::Miss => s.serialize_str("MISS"),
        }
    }
}

impl<'de> Deserialize<'de> for Rank {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Hit(usize),
            Miss(String),
        }
        match Raw::deserialize(d)? {
            Raw::Hit(0) => Err(serde::de::Error::custom("rank must be >= 1")),
            Raw::Hit(n) => Ok(Rank::Hit(n)),
            Raw::Miss(s) if s == "MISS" => Ok(Rank::Miss),
            Raw::Miss(s) => Err(serde::de::Error::custom(format!("unexpected rank `{s}`"))),
        }
    }
}

/// Fraction of cases ranked at or above `n`. Misses never count.
pub fn top_n_accuracy(ranks: &[Rank], n: usize) -> Result<f64, EvalError> {
    if n == 0 {
        return Err(EvalError::ZeroN);
    }
    if ranks.is_empty() {
        return Err(EvalError::EmptyCases);
    }
    let hits = ranks
        .iter()
        .filter(|r| matches!(r, Rank::Hit(k) if *k <= n))
        .count();
    Ok(hits as f64 / ranks.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalCase {
    pub query: String,
    pub truth_node_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub dataset_name: String,
    pub provider_name: String,
    pub case_count: usize,
    pub top_n: BTreeMap<usize, f64>,
    pub ranks: Vec<Rank>,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dataset   {}", self.dataset_name);
        let _ = writeln!(out, "provider  {}", self.provider_name);
        let _ = writeln!(out, "cases     {}", self.case_count);
        let _ = writeln!(out, "{:>6}  {:>10}", "n", "accuracy");
        for (n, acc) in &self.top_n {
            let _ = writeln!(out, "{n:>6}  {acc:>10.4}");
        }
        let misses = self.ranks.iter().filter(|r| **r == Rank::Miss).count();
        let _ = writeln!(out, "misses    {misses}");
        out
    }
}

/// Rank of `truth` among the distinct nodes of a context ranking: each node
/// takes the position of its best context.
pub fn node_rank(ranked: &[ScoredContext], truth: &str) -> Rank {
    let mut seen = BTreeSet::new();
    for ctx in ranked {
        if seen.insert(ctx.node_id.as_str()) && ctx.node_id == truth {
            return Rank::Hit(seen.len());
        }
    }
    Rank::Miss
}

pub fn run_retrieval_benchmark(
    dataset_name: &str,
    index: &VectorIndex,
    cases: &[RetrievalCase],
    provider: &dyn EmbeddingProvider,
    ns: &[usize],
) -> Result<BenchmarkReport, EvalError> {
    if index.is_empty() {
        return Err(EvalError::EmptyIndex);
    }
    if cases.is_empty() {
        return Err(EvalError::EmptyCases);
    }
    let mut ranks = Vec::with_capacity(cases.len());
    for case in cases {
        let rank = match embed_text(provider, &case.query) {
            Ok(query) => node_rank(&index.brute_force_rank(&query)?, &case.truth_node_id),
            Err(EmbedError::AllStopTokens | EmbedError::EmptyText) => Rank::Miss,
            Err(e) => return Err(e.into()),
        };
        ranks.push(rank);
    }
    let top_n = ns
        .iter()
        .map(|n| Ok((*n, top_n_accuracy(&ranks, *n)?)))
        .collect::<Result<_, EvalError>>()?;
    Ok(BenchmarkReport {
        dataset_name: dataset_name.to_string(),
        provider_name: provider.name().to_string(),
        case_count: cases.len(),
        top_n,
        ranks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    pub props: Props,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub src: String,
    pub rel: String,
    pub dst: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub node_id: String,
    pub text: String,
}

/// Graph content, contexts and query cases of a synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkDataset {
    pub name: String,
    pub seed: u64,
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    pub contexts: Vec<ContextSpec>,
    pub cases: Vec<RetrievalCase>,
}

impl BenchmarkDataset {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }

    pub fn nodes_with(&self, key: &str, value: &str) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.props.get(key).and_then(PropValue::as_str) == Some(value))
            .count()
    }

    /// Loads the dataset into a fresh graph and index.
    pub fn build(&self, provider: &dyn EmbeddingProvider) -> Result<(Graph, VectorIndex), EvalError> {
        let mut graph = Graph::new();
        for node in &self.nodes {
            graph.upsert_node(&node.id, node.kind, node.props.clone())?;
        }
        for edge in &self.edges {
            graph.add_edge(&edge.src, &edge.rel, &edge.dst)?;
        }
        let mut index = VectorIndex::for_provider(provider);
        for ctx in &self.contexts {
            index.index_context(&graph, &ctx.node_id, &ctx.text, provider)?;
        }
        Ok((graph, index))
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).expect("pool is nonempty")
}

fn slug(s: &str) -> String {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("-")
}

pub const MOVIE_COUNT: usize = 38;
pub const PERSON_COUNT: usize = 133;
const CAST_PER_MOVIE: usize = 4;

const TITLE_ADJECTIVES: &[&str] = &[
    "Silent", "Crimson", "Hidden", "Broken", "Golden", "Midnight", "Frozen", "Distant", "Burning", "Lost",
    "Electric", "Quiet", "Savage", "Hollow", "Iron", "Velvet", "Wild", "Last", "Secret", "Endless",
];
const TITLE_NOUNS: &[&str] = &[
    "Harbor", "Empire", "Garden", "Signal", "River", "Kingdom", "Witness", "Horizon", "Protocol", "Orchard",
    "Frontier", "Mirror", "Station", "Promise", "Tide", "Circuit", "Lantern", "Canyon", "Letter", "Summit",
];
const GENRES: &[&str] = &[
    "thriller", "drama", "comedy", "science fiction story", "western", "romance", "war film", "mystery",
];
const MOVIE_KEYWORDS: &[&str] = &[
    "revenge", "friendship", "betrayal", "robots", "time travel", "a heist", "a shipwreck", "a family secret",
    "artificial intelligence", "a boxing champion", "a lost treasure", "a haunted house", "a prison escape",
    "a space colony", "a chess prodigy", "a jazz band", "a small town election", "a virus outbreak",
    "a stolen painting", "a mountain rescue", "a submarine crew", "a wedding", "a courtroom battle",
    "a dragon", "an undercover agent", "a road trip", "a cooking contest", "a spy network", "a rebellion",
    "a hacker", "a ghost ship", "a desert oasis",
];
const PLACES: &[&str] = &[
    "Paris", "Tokyo", "a remote island", "the Alps", "New York", "a mining town", "Mars", "Berlin",
    "the Sahara", "a lighthouse", "Rio", "the Arctic",
];
const FIRST_NAMES: &[&str] = &[
    "Alice", "Bruno", "Chloe", "Diego", "Elena", "Felix", "Greta", "Hugo", "Ines", "Jonas", "Karin",
    "Luca", "Maya", "Nils", "Olivia", "Pablo", "Quinn", "Rosa", "Stefan", "Tara", "Umar", "Vera",
];
const LAST_NAMES: &[&str] = &[
    "Keller", "Moreau", "Rossi", "Novak", "Berg", "Silva", "Fischer", "Laurent", "Costa", "Meyer", "Dubois",
    "Ricci", "Larsen", "Weber", "Martin", "Bianchi", "Jansen", "Schmid", "Petit", "Lopez",
];

/// 38 movies, 133 people, one context per movie and two question cases per movie.
pub fn generate_movie_benchmark(seed: u64) -> BenchmarkDataset {
    let mut rng = rng(seed);

    let mut titles: Vec<String> = TITLE_ADJECTIVES
        .iter()
        .flat_map(|a| TITLE_NOUNS.iter().map(move |n| format!("The {a} {n}")))
        .collect();
    titles.shuffle(&mut rng);
    titles.truncate(MOVIE_COUNT);

    let mut people: Vec<String> = FIRST_NAMES
        .iter()
        .flat_map(|f| LAST_NAMES.iter().map(move |l| format!("{f} {l}")))
        .collect();
    people.shuffle(&mut rng);
    people.truncate(PERSON_COUNT);

    // Every person fills at least one slot; leftover slots draw at random.
    let mut order: Vec<usize> = (0..PERSON_COUNT).collect();
    order.shuffle(&mut rng);
    let mut casts: Vec<Vec<usize>> = Vec::with_capacity(MOVIE_COUNT);
    for m in 0..MOVIE_COUNT {
        let mut cast = Vec::with_capacity(CAST_PER_MOVIE);
        for r in 0..CAST_PER_MOVIE {
            let slot = m * CAST_PER_MOVIE + r;
            let person = if slot < PERSON_COUNT {
                order[slot]
            } else {
                loop {
                    let p = rng.gen_range(0..PERSON_COUNT);
                    if !cast.contains(&p) {
                        break p;
                    }
                }
            };
            cast.push(person);
        }
        casts.push(cast);
    }

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut contexts = Vec::new();
    let mut cases = Vec::new();
    let person_id = |p: usize| format!("person:{}", slug(&people[p]));

    for (p, name) in people.iter().enumerate() {
        nodes.push(NodeSpec {
            id: person_id(p),
            kind: NodeKind::Generic,
            props: [
                ("type".to_string(), PropValue::from("person")),
                ("name".to_string(), PropValue::from(name.as_str())),
            ]
            .into(),
        });
    }

    for (m, title) in titles.iter().enumerate() {
        let id = format!("movie:{}", slug(title));
        let year = rng.gen_range(1975..=2015);
        let genre = pick(&mut rng, GENRES);
        let mut kws: Vec<&str> = MOVIE_KEYWORDS.to_vec();
        kws.shuffle(&mut rng);
        let (kw1, kw2) = (kws[0], kws[1]);
        let place = pick(&mut rng, PLACES);
        let director = casts[m][0];
        let actors = &casts[m][1..];
        let actor_names: Vec<&str> = actors.iter().map(|a| people[*a].as_str()).collect();

        nodes.push(NodeSpec {
            id: id.clone(),
            kind: NodeKind::Generic,
            props: [
                ("type".to_string(), PropValue::from("movie")),
                ("title".to_string(), PropValue::from(title.as_str())),
                ("released".to_string(), PropValue::from(f64::from(year))),
            ]
            .into(),
        });
        edges.push(EdgeSpec {
            src: person_id(director),
            rel: "directed".into(),
            dst: id.clone(),
        });
        for a in actors {
            edges.push(EdgeSpec {
                src: person_id(*a),
                rel: "acted_in".into(),
                dst: id.clone(),
            });
        }
        contexts.push(ContextSpec {
            node_id: id.clone(),
            text: format!(
                "{title}. A {genre} about {kw1} and {kw2} set in {place}. Released in {year}. Starring {}. Directed by {}.",
                actor_names.join(", "),
                people[director]
            ),
        });
        cases.push(RetrievalCase {
            query: format!("who acted in {title}"),
            truth_node_id: id.clone(),
        });
        cases.push(RetrievalCase {
            query: format!("movie about {kw1}"),
            truth_node_id: id,
        });
    }

    BenchmarkDataset {
        name: "movie".into(),
        seed,
        nodes,
        edges,
        contexts,
        cases,
    }
}

pub const ANIMAL_COUNT: usize = 50;

const ANIMALS: &[&str] = &[
    "lion", "tiger", "elephant", "giraffe", "zebra", "penguin", "koala", "kangaroo", "panda", "wolf",
    "fox", "bear", "otter", "beaver", "owl", "eagle", "parrot", "flamingo", "peacock", "crocodile",
    "turtle", "chameleon", "cobra", "frog", "salmon", "shark", "dolphin", "whale", "octopus", "jellyfish",
    "crab", "lobster", "bee", "butterfly", "ant", "spider", "bat", "hedgehog", "squirrel", "rabbit",
    "deer", "moose", "camel", "llama", "hippo", "rhino", "gorilla", "lemur", "sloth", "armadillo",
];
const COLORS: &[&str] = &[
    "brown", "grey", "black", "white", "orange", "golden", "green", "red", "blue", "yellow", "spotted", "striped",
];
const COVERINGS: &[&str] = &["fur", "feathers", "scales", "smooth skin", "a hard shell", "thick hide"];
const SIZES: &[&str] = &["tiny", "small", "medium", "large", "huge"];
const HABITATS: &[&str] = &[
    "forest", "savanna", "ocean", "desert", "arctic", "jungle", "river", "mountains", "grassland", "swamp",
];
const FEATURES: &[&str] = &[
    "long tail", "sharp claws", "big ears", "long neck", "sharp beak", "webbed feet", "curved horns",
    "ivory tusks", "thick mane", "long trunk", "belly pouch", "large wings", "many legs", "long tentacles",
    "strong jaws", "bushy tail", "round eyes", "sticky tongue", "spiny back", "powerful legs",
];
const DIETS: &[&str] = &["carnivore", "herbivore", "omnivore", "insectivore"];

/// Traits of one generated animal, in description order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnimalTraits {
    pub coat: String,
    pub size: String,
    pub habitat: String,
    pub features: [String; 2],
    pub diet: String,
}

impl AnimalTraits {
    /// Trait phrases, as used in case trait lists.
    pub fn phrases(&self) -> Vec<String> {
        vec![
            self.coat.clone(),
            format!("{} body", self.size),
            format!("{} habitat", self.habitat),
            self.features[0].clone(),
            self.features[1].clone(),
            format!("{} diet", self.diet),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimalBenchmark {
    pub dataset: BenchmarkDataset,
    pub traits: BTreeMap<String, AnimalTraits>,
    /// Trait phrases each case was built from, parallel to `dataset.cases`.
    pub case_traits: Vec<Vec<String>>,
}

/// 50 animal descriptions from seeded trait sentences, with two
/// trait-subset queries per animal.
pub fn generate_animal_benchmark(seed: u64) -> AnimalBenchmark {
    let mut rng = rng(seed);
    let mut nodes = Vec::new();
    let mut contexts = Vec::new();
    let mut cases = Vec::new();
    let mut case_traits = Vec::new();
    let mut traits = BTreeMap::new();

    for name in ANIMALS.iter().take(ANIMAL_COUNT) {
        let id = format!("animal:{name}");
        let mut feats: Vec<&str> = FEATURES.to_vec();
        feats.shuffle(&mut rng);
        let t = AnimalTraits {
            coat: format!("{} {}", pick(&mut rng, COLORS), pick(&mut rng, COVERINGS)),
            size: pick(&mut rng, SIZES).to_string(),
            habitat: pick(&mut rng, HABITATS).to_string(),
            features: [feats[0].to_string(), feats[1].to_string()],
            diet: pick(&mut rng, DIETS).to_string(),
        };
        nodes.push(NodeSpec {
            id: id.clone(),
            kind: NodeKind::Generic,
            props: [
                ("type".to_string(), PropValue::from("animal")),
                ("name".to_string(), PropValue::from(*name)),
            ]
            .into(),
        });
        contexts.push(ContextSpec {
            node_id: id.clone(),
            text: format!(
                "The {name} has {}. It has a {} body. It lives in the {}. It is known for its {} and {}. It is a {}.",
                t.coat, t.size, t.habitat, t.features[0], t.features[1], t.diet
            ),
        });

        let phrases = t.phrases();
        for _ in 0..2 {
            let take = rng.gen_range(2..=3);
            let mut chosen: Vec<usize> = (0..phrases.len()).collect();
            chosen.shuffle(&mut rng);
            chosen.truncate(take);
            chosen.sort_unstable();
            let parts: Vec<String> = chosen.iter().map(|i| paraphrase_animal_trait(*i, &t)).collect();
            cases.push(RetrievalCase {
                query: format!("I am looking for an animal {}", parts.join(" and ")),
                truth_node_id: id.clone(),
            });
            case_traits.push(chosen.iter().map(|i| phrases[*i].clone()).collect());
        }
        traits.insert(id, t);
    }

    AnimalBenchmark {
        dataset: BenchmarkDataset {
            name: "animal".into(),
            seed,
            nodes,
            edges: Vec::new(),
            contexts,
            cases,
        },
        traits,
        case_traits,
    }
}

fn paraphrase_animal_trait(slot: usize, t: &AnimalTraits) -> String {
    match slot {
        0 => format!("covered in {}", t.coat),
        1 => format!("that is {} in size", t.size),
        2 => format!("found in the {}", t.habitat),
        3 => format!("with a {}", t.features[0]),
        4 => format!("with a {}", t.features[1]),
        _ => format!("that eats like a {}", t.diet),
    }
}

pub const DEFECT_COUNT: usize = 28;
pub const FOCUS_DEFECTS: usize = 5;
pub const NOVICES: usize = 6;
pub const DESCRIPTIONS_PER_NOVICE: usize = 3;
pub const BLANK_ANSWERS: usize = 2;

const DEFECT_NAMES: &[&str] = &[
    "stain", "scratch", "dent", "pit", "chatter marks", "burr", "crack", "porosity", "inclusion", "blister",
    "corrosion", "oxidation", "lamination", "warp", "tool mark", "roll mark", "orange peel", "pickup",
    "streak", "heat tint", "edge crack", "fold", "seam", "scale", "gouge", "waviness", "discoloration",
    "handling damage",
];
const DEFECT_CATEGORIES: &[&str] = &["surface", "geometry", "material", "edge"];
const DEFECT_MACHINES: &[&str] = &[
    "milling machine", "rolling mill", "band saw", "hydraulic press", "annealing furnace", "polishing line",
    "overhead crane",
];
const DEFECT_COLORS: &[&str] = &["dark", "bright", "grey", "whitish", "black", "brownish", "shiny", "dull", "bluish"];
const DEFECT_SHAPES: &[&str] = &["round", "linear", "elongated", "irregular", "circular", "wavy", "pointed", "spotted"];
const DEFECT_TEXTURES: &[&str] = &["rough", "smooth", "raised", "recessed", "cracked", "porous", "flaky", "glossy"];
const DEFECT_LOCATIONS: &[&str] = &["edge", "corner", "center", "entire face", "drilled holes", "rolling direction"];

/// Lay wording a novice might use for an expert term.
const LAY_TERMS: &[(&str, &str)] = &[
    ("dark", "blackish"),
    ("bright", "light colored"),
    ("grey", "greyish"),
    ("whitish", "pale"),
    ("brownish", "rusty looking"),
    ("shiny", "reflective"),
    ("dull", "matte"),
    ("bluish", "blue tinted"),
    ("round", "circle shaped"),
    ("linear", "straight line"),
    ("elongated", "long"),
    ("irregular", "weird shaped"),
    ("circular", "ring"),
    ("wavy", "wobbly"),
    ("pointed", "sharp"),
    ("spotted", "dotted"),
    ("rough", "bumpy"),
    ("raised", "sticking out"),
    ("recessed", "sunken"),
    ("cracked", "broken"),
    ("porous", "full of little holes"),
    ("flaky", "peeling"),
    ("glossy", "polished"),
    ("edge", "side"),
    ("corner", "tip"),
    ("center", "middle"),
    ("entire face", "whole plate"),
    ("drilled holes", "holes"),
    ("rolling direction", "length of the sheet"),
];

const NOVICE_OPENERS: &[&str] = &[
    "I see a", "there is a", "looks like a", "the plate has a", "I noticed a", "some kind of",
];

fn lay(term: &str) -> &str {
    LAY_TERMS
        .iter()
        .find(|(expert, _)| *expert == term)
        .map_or(term, |(_, lay)| lay)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectTraits {
    pub color: String,
    pub shape: String,
    pub texture: String,
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectBenchmark {
    pub seed: u64,
    pub catalog: Catalog,
    pub traits: BTreeMap<String, DefectTraits>,
    pub focus_defects: Vec<String>,
    pub cases: Vec<RetrievalCase>,
}

impl DefectBenchmark {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("benchmark serializes")
    }

    /// Ingests the catalog into fresh in-memory stores.
    pub fn build(&self, provider: &dyn EmbeddingProvider) -> Result<(Graph, VectorIndex, RuleBook), EvalError> {
        let mut graph = Graph::new();
        let mut index = VectorIndex::for_provider(provider);
        let mut rules = RuleBook::new();
        let media = MediaStore::in_memory();
        let mut stores = KnowledgeStores {
            graph: &mut graph,
            index: &mut index,
            media: &media,
            rules: &mut rules,
            embedder: provider,
        };
        ingest_catalog(&mut stores, &self.catalog, None)?;
        Ok((graph, index, rules))
    }
}

/// 28-defect synthetic catalog with three expert descriptions each, and 88
/// novice-style queries over five focus defects (90 answers, two blank).
pub fn generate_defect_benchmark(seed: u64) -> DefectBenchmark {
    let mut rng = rng(seed);
    let mut defects = Vec::with_capacity(DEFECT_COUNT);
    let mut traits = BTreeMap::new();

    for name in DEFECT_NAMES.iter().take(DEFECT_COUNT) {
        let id = slug(name);
        let t = DefectTraits {
            color: pick(&mut rng, DEFECT_COLORS).to_string(),
            shape: pick(&mut rng, DEFECT_SHAPES).to_string(),
            texture: pick(&mut rng, DEFECT_TEXTURES).to_string(),
            location: pick(&mut rng, DEFECT_LOCATIONS).to_string(),
        };
        let machine_count = rng.gen_range(1..=2);
        let mut machines: Vec<&str> = DEFECT_MACHINES.to_vec();
        machines.shuffle(&mut rng);
        machines.truncate(machine_count);
        let category = pick(&mut rng, DEFECT_CATEGORIES);
        let depth_limit = f64::from(rng.gen_range(1..=5u32)) / 10.0;

        let descriptions = vec![
            format!("{name}: {} {} mark on the plate, usually near the {}.", t.color, t.shape, t.location),
            format!("{} {} {} zone caused by the {}.", t.texture, t.shape, name, machines[0]),
            format!("Check the {} for a {} {} area; typical of {} defects.", t.location, t.color, t.texture, category),
        ];
        defects.push(CatalogDefect {
            id: id.clone(),
            name: name.to_string(),
            category: category.to_string(),
            machines: machines.iter().map(|m| m.to_string()).collect(),
            descriptions,
            images: Vec::new(),
            measurement_instruction: format!("Measure the depth of the {name} with the depth gauge in mm."),
            rules: vec![
                RuleSpec {
                    metric: "depth".into(),
                    op: CompareOp::Le,
                    threshold: Threshold::Single(depth_limit),
                    action: Action::Conform,
                    priority: 1,
                },
                RuleSpec {
                    metric: "depth".into(),
                    op: CompareOp::Gt,
                    threshold: Threshold::Single(depth_limit),
                    action: Action::Scrap,
                    priority: 2,
                },
            ],
        });
        traits.insert(id, t);
    }

    let mut focus: Vec<String> = defects.iter().map(|d| d.id.clone()).collect();
    focus.shuffle(&mut rng);
    focus.truncate(FOCUS_DEFECTS);
    focus.sort();

    let mut answers = Vec::with_capacity(NOVICES * FOCUS_DEFECTS * DESCRIPTIONS_PER_NOVICE);
    for _novice in 0..NOVICES {
        for defect in &focus {
            let t = &traits[defect];
            for _ in 0..DESCRIPTIONS_PER_NOVICE {
                answers.push(RetrievalCase {
                    query: novice_description(&mut rng, t),
                    truth_node_id: defect.clone(),
                });
            }
        }
    }
    let mut blanks: Vec<usize> = (0..answers.len()).collect();
    blanks.shuffle(&mut rng);
    let blanks: BTreeSet<usize> = blanks.into_iter().take(BLANK_ANSWERS).collect();
    let cases = answers
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !blanks.contains(i))
        .map(|(_, c)| c)
        .collect();

    DefectBenchmark {
        seed,
        catalog: Catalog { defects },
        traits,
        focus_defects: focus,
        cases,
    }
}

fn novice_description<R: Rng>(rng: &mut R, t: &DefectTraits) -> String {
    let mut words = vec![pick(rng, NOVICE_OPENERS).to_string()];
    let slots = [&t.color, &t.shape, &t.texture];
    let mut used = 0;
    for term in slots {
        if rng.gen_bool(0.7) {
            words.push(if rng.gen_bool(0.5) { lay(term).to_string() } else { term.clone() });
            used += 1;
        }
    }
    if used == 0 {
        words.push(lay(&t.shape).to_string());
    }
    words.push("spot".to_string());
    if rng.gen_bool(0.6) {
        let loc = if rng.gen_bool(0.5) { lay(&t.location) } else { t.location.as_str() };
        words.push(format!("near the {loc}"));
    }
    words.join(" ")
}

/// Generates the named dataset, loads it, and evaluates it.
pub fn run_named_benchmark(
    dataset: &str,
    seed: u64,
    provider: &dyn EmbeddingProvider,
    ns: &[usize],
) -> Result<BenchmarkReport, EvalError> {
    match dataset {
        "movie" => {
            let ds = generate_movie_benchmark(seed);
            let (_, index) = ds.build(provider)?;
            run_retrieval_benchmark("movie", &index, &ds.cases, provider, ns)
        }
        "animal" => {
            let ds = generate_animal_benchmark(seed).dataset;
            let (_, index) = ds.build(provider)?;
            run_retrieval_benchmark("animal", &index, &ds.cases, provider, ns)
        }
        "defect" => {
            let bench = generate_defect_benchmark(seed);
            let (_, index, _) = bench.build(provider)?;
            run_retrieval_benchmark("defect", &index, &bench.cases, provider, ns)
        }
        other => Err(EvalError::UnknownDataset(other.to_string())),
    }
}
