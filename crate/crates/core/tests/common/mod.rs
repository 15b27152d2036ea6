#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use subgoal_core::db::{Database, Entity};
use subgoal_core::eval::dialog_success;
use subgoal_core::model::{placeholder, placeholders};
use subgoal_core::ontology::{DomainSchema, Ontology};
use subgoal_core::subgoal::{label_success, CandidateGroup, SubgoalSample};
use subgoal_core::synth::{synth_corpus, SynthConfig};
use subgoal_core::{BeliefState, Corpus, Dialog, DialogAct, DomainId, GoalDomain, SubgoalKind, SystemTurn, Turn, UserGoal};

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn hotel_ontology() -> Ontology {
    let mut domains = BTreeMap::new();
    domains.insert(
        DomainId::new("hotel"),
        DomainSchema {
            informable: strings(&["area", "internet", "parking", "pricerange"]),
            requestable: strings(&["address", "phone", "postcode"]),
            acts: strings(&["inform", "recommend", "request"]),
            entity_bearing: true,
            key: "name".into(),
        },
    );
    domains.insert(
        DomainId::new("taxi"),
        DomainSchema {
            informable: strings(&["departure", "destination", "leaveat"]),
            requestable: strings(&["phone", "type"]),
            acts: strings(&["inform", "request"]),
            entity_bearing: false,
            key: "name".into(),
        },
    );
    Ontology::new(domains).unwrap()
}

fn hotel(name: &str, area: &str, price: &str, internet: &str) -> Entity {
    [("name", name), ("area", area), ("pricerange", price), ("internet", internet), ("parking", "yes")]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Three hotels; only `avalon` is north, moderate and has internet.
pub fn hotel_db() -> Database {
    let mut tables = BTreeMap::new();
    tables.insert(
        DomainId::new("hotel"),
        vec![
            hotel("avalon", "north", "moderate", "yes"),
            hotel("ashley hotel", "north", "moderate", "no"),
            hotel("gonville hotel", "centre", "expensive", "yes"),
        ],
    );
    Database::new(hotel_ontology(), tables).unwrap()
}

pub fn state(pairs: &[(&str, &str, &str)]) -> BeliefState {
    let mut b = BeliefState::new();
    for (d, s, v) in pairs {
        b.insert(d, s, v);
    }
    b
}

pub fn goal(domain: &str, constraints: &[(&str, &str)], requests: &[&str]) -> UserGoal {
    let mut g = UserGoal::default();
    g.domains.insert(
        DomainId::new(domain),
        GoalDomain {
            constraints: constraints.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            requests: requests.iter().map(|s| s.to_string()).collect(),
        },
    );
    g
}

pub fn sys(state: BeliefState, acts: &[(&str, &str, Option<&str>)], response: &str) -> SystemTurn {
    SystemTurn {
        state,
        acts: acts.iter().map(|(d, a, s)| DialogAct::new(d, a, *s)).collect(),
        response: response.into(),
    }
}

pub fn fig1_goal() -> UserGoal {
    goal("hotel", &[("area", "north"), ("internet", "yes"), ("pricerange", "moderate")], &["address"])
}

/// Hotel search ending in an offer of the only matching hotel plus its address.
pub fn fig1_dialog() -> Dialog {
    let full = state(&[("hotel", "area", "north"), ("hotel", "internet", "yes"), ("hotel", "pricerange", "moderate")]);
    Dialog {
        id: "fig1".into(),
        goal_id: "fig1".into(),
        turns: vec![
            Turn {
                user: "Hello! Can you tell me about places to stay in the north? I need free wifi.".into(),
                system: sys(
                    state(&[("hotel", "area", "north"), ("hotel", "internet", "yes")]),
                    &[("hotel", "request", Some("price"))],
                    "what price range would you like?",
                ),
            },
            Turn {
                user: "Moderately priced, please.".into(),
                system: sys(
                    full.clone(),
                    &[("hotel", "recommend", Some("name")), ("hotel", "inform", Some("address"))],
                    "i would recommend [hotel_name]. it is located at [hotel_address].",
                ),
            },
        ],
    }
}

const USERS: [&str; 5] = [
    "hi, i need a hotel in the north.",
    "moderate price please.",
    "does it have parking?",
    "what is the address?",
    "and the phone number?",
];

fn hotel_turns(
    states: [BeliefState; 5],
    responses: [&str; 5],
    acts: [&[(&str, &str, Option<&str>)]; 5],
) -> Vec<Turn> {
    (0..5)
        .map(|t| Turn {
            user: USERS[t].into(),
            system: sys(states[t].clone(), acts[t], responses[t]),
        })
        .collect()
}

pub fn fig2_goal() -> UserGoal {
    goal("hotel", &[("area", "north"), ("pricerange", "moderate")], &["address", "phone"])
}

/// Four candidates for one goal. `s` succeeds. `o` tracks the wrong area at
/// the offer turn, `j` never gives the address, `u` never gives the phone;
/// all of them also phrase turn 2 differently, which does not matter.
pub fn fig2_candidates() -> Vec<Dialog> {
    let north = state(&[("hotel", "area", "north")]);
    let full = state(&[("hotel", "area", "north"), ("hotel", "pricerange", "moderate")]);
    let wrong = state(&[("hotel", "area", "centre"), ("hotel", "pricerange", "moderate")]);
    let offer: &[(&str, &str, Option<&str>)] = &[("hotel", "recommend", Some("name"))];
    let ask: &[(&str, &str, Option<&str>)] = &[("hotel", "request", Some("pricerange"))];
    let parking: &[(&str, &str, Option<&str>)] = &[("hotel", "inform", Some("parking"))];
    let addr: &[(&str, &str, Option<&str>)] = &[("hotel", "inform", Some("address"))];
    let phone: &[(&str, &str, Option<&str>)] = &[("hotel", "inform", Some("phone"))];
    let chat: &[(&str, &str, Option<&str>)] = &[("hotel", "inform", Some("area"))];
    let states = |b1: &BeliefState| [north.clone(), b1.clone(), full.clone(), full.clone(), full.clone()];
    let mk = |id: &str, turns: Vec<Turn>| Dialog {
        id: id.into(),
        goal_id: "fig2".into(),
        turns,
    };
    let r0 = "what price range?";
    let r1 = "[hotel_name] is a good choice.";
    let r3 = "the address is [hotel_address].";
    let r4 = "the phone number is [hotel_phone].";
    vec![
        mk(
            "d_s",
            hotel_turns(states(&full), [r0, r1, "yes, it has free parking.", r3, r4], [ask, offer, parking, addr, phone]),
        ),
        mk(
            "d_o",
            hotel_turns(states(&wrong), [r0, r1, "it does have parking.", r3, r4], [ask, offer, parking, addr, phone]),
        ),
        mk(
            "d_j",
            hotel_turns(states(&full), [r0, r1, "parking is free there.", "it is a lovely place in the [hotel_area].", r4], [ask, offer, parking, chat, phone]),
        ),
        mk(
            "d_u",
            hotel_turns(states(&full), [r0, r1, "sure, there is parking.", r3, "is there anything else?"], [ask, offer, parking, addr, &[]]),
        ),
    ]
}

pub fn fig2_group() -> CandidateGroup {
    let cands = fig2_candidates();
    let source = cands[0].clone();
    label_success(&source, &fig2_goal(), cands, &hotel_db()).unwrap()
}

/// Small synthetic world with short dialogs for randomized groups.
pub fn small_world(seed: u64) -> Corpus {
    synth_corpus(&SynthConfig {
        n_dialogs: 60,
        seed,
        entities_per_domain: 12,
        max_domains: 2,
    })
    .unwrap()
}

fn other_value<R: Rng>(rng: &mut R, db: &Database, domain: &str, slot: &str) -> Option<String> {
    let rows = db.table(domain).ok()?;
    let values: BTreeSet<&String> = rows.iter().filter_map(|e| e.get(slot)).collect();
    let values: Vec<&String> = values.into_iter().collect();
    values.choose(rng).map(|v| (*v).clone())
}

fn mutate_state<R: Rng>(rng: &mut R, state: &mut BeliefState, db: &Database) {
    let keys: Vec<(String, String)> = state
        .domains
        .iter()
        .flat_map(|(d, s)| s.keys().map(move |k| (d.to_string(), k.clone())))
        .collect();
    let Some((d, k)) = keys.choose(rng).cloned() else {
        return;
    };
    match rng.gen_range(0..4) {
        0 => {
            if let Some(v) = other_value(rng, db, &d, &k) {
                state.insert(&d, &k, &v);
            }
        }
        1 => {
            let slots = state.domains.get_mut(d.as_str()).unwrap();
            slots.remove(&k);
            if slots.is_empty() {
                state.domains.remove(d.as_str());
            }
        }
        2 => {
            if let Some(slots) = state.domains.get_mut(d.as_str()) {
                if let (Some(a), Some(b)) = (slots.get("departure").cloned(), slots.get("destination").cloned()) {
                    slots.insert("departure".into(), b);
                    slots.insert("destination".into(), a);
                }
            }
        }
        _ => {
            let v = state.get(&d, &k).unwrap().to_uppercase();
            state.insert(&d, &k, &v);
        }
    }
}

fn mutate_response<R: Rng>(rng: &mut R, turn: &mut SystemTurn) {
    let tokens: Vec<String> = placeholders(&turn.response).iter().map(|s| s.to_string()).collect();
    match (rng.gen_range(0..3), tokens.choose(rng)) {
        (0 | 1, Some(tok)) => {
            let bracketed = format!("[{tok}]");
            turn.response = turn.response.replace(&bracketed, "it");
            turn.acts.retain(|a| {
                a.slot
                    .as_deref()
                    .is_none_or(|s| !tok.ends_with(&format!("_{}", s.to_lowercase())))
            });
        }
        _ => turn.response = format!("okay. {}", turn.response),
    }
}

/// A randomized group of up to `max_dialogs` candidates built from a source
/// dialog of at most `max_turns` turns, with random state and response errors
/// and frequent fragment sharing between candidates.
pub fn random_group<R: Rng>(rng: &mut R, world: &Corpus, max_dialogs: usize, max_turns: usize) -> CandidateGroup {
    let short: Vec<&Dialog> = world.dialogs.iter().filter(|d| d.turns.len() <= max_turns).collect();
    let source = *short.choose(rng).expect("world has short dialogs");
    let goal = &world.goals[&source.goal_id];
    let n = rng.gen_range(1..=max_dialogs);
    let mut dialogs: Vec<Dialog> = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = source.clone();
        d.id = format!("{}#{j:03}", source.id);
        for t in 0..d.turns.len() {
            let roll: f64 = rng.gen();
            if roll < 0.25 && j > 0 {
                let donor = rng.gen_range(0..j);
                let kind = *SubgoalKind::ALL.choose(rng).unwrap();
                let src = dialogs[donor].turns[t].system.clone();
                d = d.replace_turn(t, kind, &src).unwrap();
            } else if roll < 0.45 {
                mutate_state(rng, &mut d.turns[t].system.state, &world.db);
            } else if roll < 0.65 {
                mutate_response(rng, &mut d.turns[t].system);
            }
        }
        dialogs.push(d);
    }
    label_success(source, goal, dialogs, &world.db).unwrap()
}

/// (successful dialog, turn, kind) -> ids of the unsuccessful dialogs whose
/// fragment flips it, in id order.
pub type SiteMap = BTreeMap<(String, usize, SubgoalKind), Vec<String>>;

/// Exhaustive replacement enumeration, independent of the library's detector.
pub fn oracle_detect(group: &CandidateGroup, db: &Database) -> SiteMap {
    let mut out = SiteMap::new();
    let mut ids: Vec<&str> = group.candidates.iter().map(|c| c.dialog.id.as_str()).collect();
    ids.sort();
    let by_id = |id: &str| group.candidates.iter().find(|c| c.dialog.id == id).unwrap();
    for s in &ids {
        let winner = by_id(s);
        if !winner.success {
            continue;
        }
        for t in 0..winner.dialog.turns.len() {
            for kind in [SubgoalKind::State, SubgoalKind::ActResponse] {
                for o in &ids {
                    let loser = by_id(o);
                    if loser.success {
                        continue;
                    }
                    let mine = &winner.dialog.turns[t].system;
                    let theirs = &loser.dialog.turns[t].system;
                    let mut patched = winner.dialog.clone();
                    let slot = &mut patched.turns[t].system;
                    match kind {
                        SubgoalKind::State => {
                            if mine.state == theirs.state {
                                continue;
                            }
                            slot.state = theirs.state.clone();
                        }
                        SubgoalKind::ActResponse => {
                            if mine.acts == theirs.acts && mine.response == theirs.response {
                                continue;
                            }
                            slot.acts = theirs.acts.clone();
                            slot.response = theirs.response.clone();
                        }
                    }
                    if !dialog_success(&patched, &group.goal, db).unwrap() {
                        out.entry((s.to_string(), t, kind)).or_default().push(o.to_string());
                    }
                }
            }
        }
    }
    out
}

pub fn site_map(samples: &[SubgoalSample]) -> SiteMap {
    samples
        .iter()
        .map(|s| {
            (
                (s.dialog_id.clone(), s.turn, s.kind),
                s.negatives.iter().map(|n| n.dialog_id.clone()).collect(),
            )
        })
        .collect()
}

pub fn has_placeholder(dialog: &Dialog, domain: &str, slot: &str) -> bool {
    let token = placeholder(domain, slot);
    dialog.turns.iter().any(|t| t.system.response.contains(&token))
}
