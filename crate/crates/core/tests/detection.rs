mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subgoal_core::eval::dialog_success;
use subgoal_core::generator::{serialize_act_prompt, serialize_state_prompt};
use subgoal_core::subgoal::{
    assemble_candidates, detect_subgoals, emit_dpo, emit_sft, label_success, target_text, Candidate, PairPolicy,
};
use subgoal_core::{Fragment, SubgoalKind};

use common::*;

#[test]
fn fig2_subgoals() {
    let group = fig2_group();
    let samples = detect_subgoals(&group, &hotel_db()).unwrap();
    let sites: Vec<(&str, usize, SubgoalKind, Vec<&str>)> = samples
        .iter()
        .map(|s| {
            (
                s.dialog_id.as_str(),
                s.turn,
                s.kind,
                s.negatives.iter().map(|n| n.dialog_id.as_str()).collect(),
            )
        })
        .collect();
    assert_eq!(
        sites,
        vec![
            ("d_s", 1, SubgoalKind::State, vec!["d_o"]),
            ("d_s", 3, SubgoalKind::ActResponse, vec!["d_j"]),
            ("d_s", 4, SubgoalKind::ActResponse, vec!["d_u"]),
        ]
    );
    // turn 2 differs in every loser yet never matters
    assert!(samples.iter().all(|s| s.turn != 2));
    let b_o1 = &group.candidates.iter().find(|c| c.dialog.id == "d_o").unwrap().dialog.turns[1].system.state;
    assert_eq!(samples[0].negatives[0].fragment, Fragment::State { state: b_o1.clone() });
}

#[test]
fn fig2_matches_oracle() {
    let group = fig2_group();
    let samples = detect_subgoals(&group, &hotel_db()).unwrap();
    assert_eq!(site_map(&samples), oracle_detect(&group, &hotel_db()));
}

#[test]
fn homogeneous_groups_yield_nothing() {
    let mut group = fig2_group();
    group.candidates.retain(|c| c.success);
    assert!(detect_subgoals(&group, &hotel_db()).unwrap().is_empty());

    let mut failing = fig2_group();
    failing.candidates.retain(|c| !c.success);
    assert!(detect_subgoals(&failing, &hotel_db()).unwrap().is_empty());
}

#[test]
fn fig2_dpo_record() {
    let group = fig2_group();
    let samples = detect_subgoals(&group, &hotel_db()).unwrap();
    let records = emit_dpo(&samples, PairPolicy::First);
    assert_eq!(records.len(), samples.len());
    let state_rec = &records[0];
    assert_eq!(state_rec.kind, SubgoalKind::State);
    assert_eq!(state_rec.prompt, serialize_state_prompt(&samples[0].context).text);
    assert_eq!(state_rec.chosen, "[B] hotel area: north; pricerange: moderate;");
    assert_eq!(state_rec.rejected, "[B] hotel area: centre; pricerange: moderate;");
    let act_rec = &records[1];
    assert_eq!(act_rec.prompt, serialize_act_prompt(&samples[1].context, &samples[1].positive.state).text);
    assert_eq!(act_rec.chosen, "[A] hotel inform ADDRESS; [R] the address is [hotel_address].");
    for r in &records {
        assert_ne!(r.chosen, r.rejected);
    }
}

#[test]
fn sft_records_follow_samples() {
    let group = fig2_group();
    let samples = detect_subgoals(&group, &hotel_db()).unwrap();
    let records = emit_sft(&samples);
    assert_eq!(records.len(), samples.len());
    assert!(records[0].target.starts_with("[B] "));
    assert!(records[1].target.starts_with("[A] "));
    let keys: Vec<_> = records.iter().map(|r| (&r.goal_id, &r.dialog_id, r.turn, r.kind)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn all_policy_counts_distinct_negatives() {
    let mut group = fig2_group();
    // two more losers with their own wrong offer-turn states
    for (id, area) in [("d_v", "centre"), ("d_w", "south"), ("d_x", "east")] {
        let mut d = group.candidates.iter().find(|c| c.dialog.id == "d_o").unwrap().dialog.clone();
        d.id = id.into();
        d.turns[1].system.state.insert("hotel", "area", area);
        group.candidates.push(Candidate { dialog: d, success: false });
    }
    let samples = detect_subgoals(&group, &hotel_db()).unwrap();
    let state = samples.iter().find(|s| s.kind == SubgoalKind::State).unwrap();
    // d_o and d_v share the same wrong state
    assert_eq!(state.negatives.len(), 4);
    let all = emit_dpo(std::slice::from_ref(state), PairPolicy::All);
    assert_eq!(all.len(), 3);
    let first = emit_dpo(std::slice::from_ref(state), PairPolicy::First);
    assert_eq!(first.len(), 1);
}

#[test]
fn tab7_state_target() {
    let s = state(&[("train", "departure", "london liverpool street"), ("train", "destination", "cambridge")]);
    let target = target_text(&Fragment::State { state: s });
    assert!(target.contains("departure: london liverpool street;"));
    assert_eq!(target, "[B] train departure: london liverpool street; destination: cambridge;");
}

#[test]
fn assemble_requires_every_turn() {
    let d = fig1_dialog();
    assert!(assemble_candidates(&d, &[], 2).is_err());
}

#[test]
fn identity_replacement_never_flips() {
    let group = fig2_group();
    for c in &group.candidates {
        for t in 0..c.dialog.turns.len() {
            for kind in SubgoalKind::ALL {
                let same = c.dialog.replace_turn(t, kind, &c.dialog.turns[t].system).unwrap();
                assert_eq!(dialog_success(&same, &group.goal, &hotel_db()).unwrap(), c.success);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn detection_equals_oracle(seed in any::<u64>()) {
        let world = small_world(seed % 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let group = random_group(&mut rng, &world, 4, 4);
        let samples = detect_subgoals(&group, &world.db).unwrap();
        prop_assert_eq!(site_map(&samples), oracle_detect(&group, &world.db));
        for s in &samples {
            let loser_ids: BTreeSet<_> = group.candidates.iter().filter(|c| !c.success).map(|c| &c.dialog.id).collect();
            prop_assert!(s.negatives.iter().all(|n| loser_ids.contains(&n.dialog_id)));
        }
    }

    #[test]
    fn adding_a_loser_keeps_subgoals(seed in any::<u64>()) {
        let world = small_world(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let group = random_group(&mut rng, &world, 5, 6);
        let Some(loser) = group.candidates.iter().position(|c| !c.success) else {
            return Ok(());
        };
        let mut smaller = group.clone();
        smaller.candidates.remove(loser);
        let before: BTreeSet<_> = site_map(&detect_subgoals(&smaller, &world.db).unwrap()).into_keys().collect();
        let after: BTreeSet<_> = site_map(&detect_subgoals(&group, &world.db).unwrap()).into_keys().collect();
        prop_assert!(before.is_subset(&after));
    }

    #[test]
    fn preference_pairs_flip(seed in any::<u64>()) {
        let world = small_world(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let group = random_group(&mut rng, &world, 5, 6);
        let samples = detect_subgoals(&group, &world.db).unwrap();
        for s in &samples {
            let winner = &group.candidates.iter().find(|c| c.dialog.id == s.dialog_id).unwrap().dialog;
            for n in &s.negatives {
                let loser = &group.candidates.iter().find(|c| c.dialog.id == n.dialog_id).unwrap().dialog;
                let patched = winner.replace_turn(s.turn, s.kind, &loser.turns[s.turn].system).unwrap();
                prop_assert!(!dialog_success(&patched, &group.goal, &world.db).unwrap());
            }
        }
        for policy in [PairPolicy::First, PairPolicy::All] {
            for r in emit_dpo(&samples, policy) {
                prop_assert_ne!(&r.chosen, &r.rejected);
            }
        }
        prop_assert_eq!(emit_sft(&samples).len(), samples.len());
    }

    #[test]
    fn relabeling_matches_direct_evaluation(seed in any::<u64>()) {
        let world = small_world(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let group = random_group(&mut rng, &world, 5, 6);
        let dialogs = group.candidates.iter().map(|c| c.dialog.clone()).collect();
        let again = label_success(&group.source, &group.goal, dialogs, &world.db).unwrap();
        for c in &again.candidates {
            prop_assert_eq!(c.success, dialog_success(&c.dialog, &group.goal, &world.db).unwrap());
        }
    }
}
