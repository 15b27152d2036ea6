//! Seeded synthetic corpora: a small multi-domain ontology, an entity
//! database and goal-annotated dialogs that succeed by construction.
//!
//! Each goal domain gets an offer turn that carries the full constraint
//! state, an optional small-talk turn, a request turn (plus a booking turn
//! for bookable domains), and the dialog closes with a goodbye turn.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, CorpusDialog, CorpusFile};
use crate::db::Entity;
use crate::error::ModelError;
use crate::model::{placeholder, BeliefState, DialogAct, DomainId, GoalDomain, SystemTurn, Turn, UserGoal};
use crate::ontology::{DomainSchema, Ontology};

const AREAS: [&str; 5] = ["centre", "north", "south", "east", "west"];
const PRICES: [&str; 3] = ["cheap", "moderate", "expensive"];
const DAYS: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const STATIONS: [&str; 6] = [
    "cambridge",
    "london liverpool street",
    "london kings cross",
    "ely",
    "norwich",
    "stansted airport",
];
const FOODS: [&str; 8] = ["mediterranean", "italian", "chinese", "indian", "british", "french", "thai", "european"];
const ATTRACTION_TYPES: [&str; 5] = ["museum", "college", "park", "theatre", "architecture"];
const HOTEL_TYPES: [&str; 2] = ["hotel", "guesthouse"];
const ADJECTIVES: [&str; 12] = [
    "golden", "royal", "quiet", "old", "grand", "little", "river", "green", "silver", "blue", "red", "north star",
];
const NOUNS: [&str; 12] = [
    "oak", "bridge", "garden", "lodge", "crown", "lion", "mill", "court", "anchor", "swan", "orchard", "tower",
];

/// Domains that can appear in a synthetic goal; taxi only ever as an extra.
const ENTITY_DOMAINS: [&str; 4] = ["attraction", "hotel", "restaurant", "train"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_dialogs: usize,
    pub seed: u64,
    /// Rows per entity-bearing table.
    pub entities_per_domain: usize,
    pub max_domains: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_dialogs: 100,
            seed: 0,
            entities_per_domain: 40,
            max_domains: 3,
        }
    }
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn schema(informable: &[&str], requestable: &[&str], acts: &[&str], entity_bearing: bool, key: &str) -> DomainSchema {
    DomainSchema {
        informable: strings(informable),
        requestable: strings(requestable),
        acts: strings(acts),
        entity_bearing,
        key: key.to_string(),
    }
}

pub fn synth_ontology() -> Ontology {
    let entity_acts = ["inform", "nooffer", "recommend", "request", "select"];
    let mut domains = BTreeMap::new();
    domains.insert(
        DomainId::new("attraction"),
        schema(&["area", "type"], &["address", "entrancefee", "phone", "postcode"], &entity_acts, true, "name"),
    );
    domains.insert(
        DomainId::new("hotel"),
        schema(
            &["area", "internet", "parking", "pricerange", "stars", "type"],
            &["address", "phone", "postcode", "ref"],
            &entity_acts,
            true,
            "name",
        ),
    );
    domains.insert(
        DomainId::new("restaurant"),
        schema(&["area", "food", "pricerange"], &["address", "phone", "postcode", "ref"], &entity_acts, true, "name"),
    );
    domains.insert(
        DomainId::new("train"),
        schema(
            &["arriveby", "day", "departure", "destination", "leaveat"],
            &["duration", "price", "ref"],
            &entity_acts,
            true,
            "id",
        ),
    );
    domains.insert(
        DomainId::new("taxi"),
        schema(&["arriveby", "departure", "destination", "leaveat"], &["phone", "type"], &["inform", "request"], false, "name"),
    );
    domains.insert(DomainId::new("booking"), schema(&[], &[], &["book", "nobook"], false, "name"));
    domains.insert(DomainId::new("general"), schema(&[], &[], &["bye", "greet", "reqmore", "welcome"], false, "name"));
    Ontology { domains }
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn clock<R: Rng>(rng: &mut R) -> String {
    format!("{:02}:{:02}", rng.gen_range(5..23), rng.gen_range(0..4) * 15)
}

fn entity_name(i: usize, suffix: &str) -> String {
    format!("{} {} {suffix}", ADJECTIVES[i % ADJECTIVES.len()], NOUNS[(i / ADJECTIVES.len()) % NOUNS.len()])
}

fn make_entity<R: Rng>(rng: &mut R, domain: &str, i: usize) -> Entity {
    let mut e = Entity::new();
    let mut set = |k: &str, v: String| {
        e.insert(k.to_string(), v);
    };
    match domain {
        "hotel" => {
            let kind = pick(rng, &HOTEL_TYPES);
            set("name", entity_name(i, if kind == "hotel" { "hotel" } else { "house" }));
            set("type", kind.into());
            set("area", pick(rng, &AREAS).into());
            set("pricerange", pick(rng, &PRICES).into());
            set("stars", rng.gen_range(1..=5).to_string());
            set("internet", pick(rng, &["yes", "no"]).into());
            set("parking", pick(rng, &["yes", "no"]).into());
        }
        "restaurant" => {
            set("name", entity_name(i, "kitchen"));
            set("food", pick(rng, &FOODS).into());
            set("area", pick(rng, &AREAS).into());
            set("pricerange", pick(rng, &PRICES).into());
        }
        "attraction" => {
            set("name", entity_name(i, "gallery"));
            set("type", pick(rng, &ATTRACTION_TYPES).into());
            set("area", pick(rng, &AREAS).into());
        }
        _ => {
            let mut stops: Vec<&str> = STATIONS.to_vec();
            stops.shuffle(rng);
            set("id", format!("tr{:04}", 1000 + i));
            set("departure", stops[0].into());
            set("destination", stops[1].into());
            set("day", pick(rng, &DAYS).into());
            let leave = clock(rng);
            let (h, m) = leave.split_once(':').expect("clock format");
            let arrive = h.parse::<u32>().expect("hour") + rng.gen_range(1..3);
            set("leaveat", leave.clone());
            set("arriveby", format!("{arrive:02}:{m}"));
        }
    }
    e
}

pub fn synth_database(seed: u64, per_domain: usize) -> BTreeMap<DomainId, Vec<Entity>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ENTITY_DOMAINS
        .iter()
        .map(|&d| {
            let rows = (0..per_domain.max(1)).map(|i| make_entity(&mut rng, d, i)).collect();
            (DomainId::new(d), rows)
        })
        .collect()
}

fn slot_words(slot: &str) -> &str {
    match slot {
        "pricerange" => "price range",
        "entrancefee" => "entrance fee",
        "leaveat" => "departure time",
        "arriveby" => "arrival time",
        "ref" => "reference number",
        other => other,
    }
}

struct Builder<'a> {
    turns: Vec<Turn>,
    state: BeliefState,
    greeting: Option<String>,
    ontology: &'a Ontology,
}

impl Builder<'_> {
    fn push(&mut self, user: String, acts: Vec<DialogAct>, response: String) {
        let user = match self.greeting.take() {
            Some(g) => format!("{g} {user}"),
            None => user,
        };
        self.turns.push(Turn {
            user,
            system: SystemTurn {
                state: self.state.clone(),
                acts,
                response,
            },
        });
    }

    fn informs(&self, domain: &str, slots: &[String]) -> (Vec<DialogAct>, String) {
        let acts = slots
            .iter()
            .map(|s| DialogAct::new(domain, "inform", Some(s.as_str())))
            .collect();
        let parts: Vec<String> = slots
            .iter()
            .map(|s| format!("the {} is {}", slot_words(s), placeholder(domain, s)))
            .collect();
        (acts, format!("{}.", parts.join(" and ")))
    }

    fn offer(&mut self, domain: &str, goal: &GoalDomain) {
        let phrase: Vec<String> = goal
            .constraints
            .iter()
            .map(|(s, v)| format!("{} {v}", slot_words(s)))
            .collect();
        for (s, v) in &goal.constraints {
            self.state.insert(domain, s, v);
        }
        let key = &self.ontology.domains[domain].key;
        let (acts, response) = if domain == "train" {
            (
                vec![
                    DialogAct::new("train", "inform", Some("id")),
                    DialogAct::new("train", "inform", Some("leaveat")),
                ],
                "[train_id] leaves at [train_leaveat].".to_string(),
            )
        } else {
            (
                vec![DialogAct::new(domain, "recommend", Some(key.as_str()))],
                format!("i would recommend {}.", placeholder(domain, key)),
            )
        };
        self.push(format!("i am looking for a {domain} with {}.", phrase.join(" and ")), acts, response);
    }

    fn taxi(&mut self, goal: &GoalDomain) {
        for (s, v) in &goal.constraints {
            self.state.insert("taxi", s, v);
        }
        let phrase: Vec<String> = goal
            .constraints
            .iter()
            .map(|(s, v)| format!("{} {v}", slot_words(s)))
            .collect();
        let slots = vec!["type".to_string(), "phone".to_string()];
        let (acts, response) = self.informs("taxi", &slots);
        self.push(format!("i also need a taxi with {}.", phrase.join(" and ")), acts, response);
    }
}

fn make_goal<R: Rng>(
    rng: &mut R,
    domains: &[&str],
    tables: &BTreeMap<DomainId, Vec<Entity>>,
    ontology: &Ontology,
) -> (UserGoal, BTreeSet<String>) {
    let mut goal = UserGoal::default();
    let mut booked = BTreeSet::new();
    for &d in domains {
        let schema = &ontology.domains[d];
        let mut entry = GoalDomain::default();
        if d == "taxi" {
            let mut stops: Vec<&str> = STATIONS.to_vec();
            stops.shuffle(rng);
            entry.constraints.insert("departure".into(), stops[0].into());
            entry.constraints.insert("destination".into(), stops[1].into());
            entry.constraints.insert("leaveat".into(), clock(rng));
            entry.requests.insert("phone".into());
        } else {
            let rows = &tables[d];
            let e = &rows[rng.gen_range(0..rows.len())];
            let slots: Vec<&String> = if d == "train" {
                schema
                    .informable
                    .iter()
                    .filter(|s| ["day", "departure", "destination"].contains(&s.as_str()))
                    .collect()
            } else {
                let n = rng.gen_range(1..=schema.informable.len().min(3));
                schema.informable.choose_multiple(rng, n).collect()
            };
            for s in slots {
                entry.constraints.insert(s.clone(), e[s.as_str()].clone());
            }
            // keep at least one wordy value so sampled states can vary in case
            if !entry.constraints.values().any(|v| v.chars().any(char::is_alphabetic)) {
                entry.constraints.insert("area".into(), e["area"].clone());
            }
            let requestable: Vec<&String> = schema.requestable.iter().filter(|s| *s != "ref").collect();
            let n = rng.gen_range(1..=2);
            for s in requestable.choose_multiple(rng, n) {
                entry.requests.insert((*s).clone());
            }
            if schema.requestable.iter().any(|s| s == "ref") && rng.gen_bool(0.4) {
                entry.requests.insert("ref".into());
                booked.insert(d.to_string());
            }
        }
        goal.domains.insert(DomainId::new(d), entry);
    }
    (goal, booked)
}

/// Generates dialog number `index`, which succeeds against its own goal.
fn make_dialog<R: Rng>(
    rng: &mut R,
    index: usize,
    cfg: &SynthConfig,
    tables: &BTreeMap<DomainId, Vec<Entity>>,
    ontology: &Ontology,
) -> CorpusDialog {
    let n_entity = rng.gen_range(1..=cfg.max_domains.clamp(1, ENTITY_DOMAINS.len()));
    let mut domains: Vec<&str> = ENTITY_DOMAINS.choose_multiple(rng, n_entity).copied().collect();
    domains.shuffle(rng);
    if domains.len() < cfg.max_domains && rng.gen_bool(0.25) {
        domains.push("taxi");
    }
    let (goal, booked) = make_goal(rng, &domains, tables, ontology);

    let mut b = Builder {
        turns: Vec::new(),
        state: BeliefState::new(),
        greeting: Some(format!("hello, this is customer {index}.")),
        ontology,
    };
    for &d in &domains {
        let entry = &goal.domains[d];
        if d == "taxi" {
            b.taxi(entry);
            continue;
        }
        b.offer(d, entry);
        if rng.gen_bool(0.3) {
            b.push(
                "that sounds good.".into(),
                vec![DialogAct::new("general", "reqmore", None)],
                "is there anything else i can help with?".into(),
            );
        }
        let asked: Vec<String> = entry.requests.iter().filter(|s| *s != "ref").cloned().collect();
        let (acts, response) = b.informs(d, &asked);
        let question: Vec<&str> = asked.iter().map(|s| slot_words(s)).collect();
        b.push(format!("could you tell me the {}?", question.join(" and ")), acts, response);
        if booked.contains(d) {
            b.push(
                "please book it for me.".into(),
                vec![DialogAct::new(&format!("booking {d}"), "book", Some("ref"))],
                format!("booked. your reference number is {}.", placeholder(d, "ref")),
            );
        }
    }
    b.push(
        "thank you, goodbye.".into(),
        vec![DialogAct::new("general", "bye", None)],
        "you are welcome. goodbye.".into(),
    );

    CorpusDialog {
        id: format!("syn{index:05}"),
        goal_id: None,
        goal,
        turns: b.turns,
    }
}

pub fn synth_corpus_file(cfg: &SynthConfig) -> CorpusFile {
    let ontology = synth_ontology();
    let database = synth_database(cfg.seed, cfg.entities_per_domain);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let dialogs = (0..cfg.n_dialogs)
        .map(|i| make_dialog(&mut rng, i, cfg, &database, &ontology))
        .collect();
    CorpusFile {
        ontology,
        database,
        dialogs,
    }
}

pub fn synth_corpus(cfg: &SynthConfig) -> Result<Corpus, ModelError> {
    Corpus::from_file(synth_corpus_file(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::dialog_success;

    #[test]
    fn every_synthetic_dialog_succeeds() {
        let corpus = synth_corpus(&SynthConfig {
            n_dialogs: 300,
            seed: 7,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(corpus.dialogs.len(), 300);
        for d in &corpus.dialogs {
            assert!(dialog_success(d, &corpus.goals[&d.goal_id], &corpus.db).unwrap(), "{}", d.id);
        }
    }

    #[test]
    fn seeded() {
        let cfg = SynthConfig {
            n_dialogs: 20,
            seed: 3,
            ..SynthConfig::default()
        };
        assert_eq!(synth_corpus_file(&cfg), synth_corpus_file(&cfg));
        let other = SynthConfig { seed: 4, ..cfg.clone() };
        assert_ne!(synth_corpus_file(&cfg), synth_corpus_file(&other));
    }
}
