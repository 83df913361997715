//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Run with `cargo test --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use bctsim::agent::BctProfile;
use bctsim::arguments::{aggregate, Argument, Polarity};
use bctsim::cli::outcome;
use bctsim::metacog::EventBody;
use bctsim::world::{EventEffect, Location};
use common::{explanation_gaps, metrics_text, routing_violations, sha256, spec, Setup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// No-break horizon. Runs with the break get the CLI default instead,
/// since restacking on the far table takes longer.
const HORIZON: u64 = 60;
const BREAK_HORIZON: u64 = 100;
const BREAK_TICK: u64 = 12;

struct Verdict {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: &'static str, title: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { id, title, pass, detail }
}

fn no_break() -> Setup {
    let mut spec = spec("room_tidy");
    spec.events.clear();
    Setup::new(spec, true, HORIZON)
}

fn with_break(metacognition: bool) -> Setup {
    Setup::new(spec("room_tidy"), metacognition, BREAK_HORIZON)
}

fn sweep_weights() -> Vec<f64> {
    (0..9).map(|i| i as f64 * 0.25).collect()
}

fn redescription_run(weight: f64) -> Setup {
    let mut s = Setup::new(spec("room_tidy_redescription"), true, BREAK_HORIZON);
    s.overrides.insert("breaks_commitment".into(), weight);
    s
}

fn abstract_run(name: &str, metacognition: bool) -> Setup {
    Setup::new(spec(name), metacognition, 40)
}

fn count(state: &bctsim::agent::SimulationState, kind: &str) -> usize {
    state.trace.events().iter().filter(|e| e.body.kind() == kind).count()
}

fn a1() -> Verdict {
    let s = no_break().run();
    let strict_at = s.metrics.iter().find(|m| m.strict_tidy).map(|m| m.tick);
    let findings = count(&s, "InconsistencyDetected");
    let cms = count(&s, "CountermeasureApplied");
    verdict(
        "A1",
        "baseline success",
        strict_at.is_some() && findings == 0 && cms == 0,
        format!("strict tidy at tick {strict_at:?}, {findings} inconsistencies, {cms} countermeasures"),
    )
}

fn a2() -> Verdict {
    let s = with_break(false).run();
    let abandon_at = s.trace.events().iter().find_map(|e| match &e.body {
        EventBody::ActionExecuted { action, outcome, .. } if action == "abandon" && outcome == "ok" => Some(e.tick),
        _ => None,
    });
    let o = outcome(&s);
    let timely = abandon_at.is_some_and(|t| t >= BREAK_TICK && t <= BREAK_TICK + 3);
    verdict(
        "A2",
        "adversity dominance without metacognition",
        timely && !o.strict && !o.relaxed,
        format!("abandon at tick {abandon_at:?}, final strict={} relaxed={}", o.strict, o.relaxed),
    )
}

/// Positions in the trace of break, first finding after it, first
/// replanning after that, and the table placements of books after that.
fn a3() -> Verdict {
    let s = with_break(true).run();
    let events = s.trace.events();
    let brk = events.iter().position(|e| {
        matches!(&e.body, EventBody::WorldEventFired { effect: EventEffect::BreakFixture(f) } if f == "shelf_1")
    });
    let finding = brk.and_then(|b| (b..events.len()).find(|&i| events[i].body.kind() == "InconsistencyDetected"));
    let replan = finding.and_then(|f| {
        (f..events.len()).find(|&i| {
            matches!(&events[i].body, EventBody::CountermeasureApplied { outcome, .. } if outcome == "replanning")
        })
    });
    let mut holding: Option<String> = None;
    let mut table_books = Vec::new();
    let mut early_table = 0;
    for (i, e) in events.iter().enumerate() {
        if let EventBody::ActionExecuted { action, outcome, .. } = &e.body {
            if outcome != "ok" {
                continue;
            }
            if let Some(obj) = action.strip_prefix("pick_up:") {
                holding = Some(obj.to_string());
            } else if let Some(target) = action.strip_prefix("place:") {
                let obj = holding.take().unwrap_or_default();
                if target == "table_1" {
                    if replan.is_some_and(|r| i > r) {
                        table_books.push(obj);
                    } else {
                        early_table += 1;
                    }
                }
            }
        }
    }
    let books: BTreeSet<String> = s
        .world
        .objects
        .values()
        .filter(|o| o.kind.name() == "book")
        .map(|o| o.id.clone())
        .collect();
    let placed: BTreeSet<String> = table_books.iter().cloned().collect();
    let on_table = s
        .world
        .objects
        .values()
        .filter(|o| books.contains(&o.id))
        .all(|o| o.location == Location::In("table_1".into()));
    let o = outcome(&s);
    let ordered = brk.is_some() && finding.is_some() && replan.is_some();
    verdict(
        "A3",
        "countermeasure restoration",
        ordered && early_table == 0 && placed == books && on_table && o.relaxed && !o.strict,
        format!(
            "break@{brk:?} finding@{finding:?} replan@{replan:?}, books placed on table after replan {table_books:?}, final strict={} relaxed={}",
            o.strict, o.relaxed
        ),
    )
}

fn a4() -> Verdict {
    let weights = sweep_weights();
    let mut abandoned = Vec::new();
    let mut sides = Vec::new();
    for &w in &weights {
        let s = redescription_run(w).run();
        let gave_up = outcome(&s).abandoned;
        let executed_by = s.trace.events().iter().find_map(|e| match &e.body {
            EventBody::ActionExecuted { action, process, .. } if action == "abandon" => process.clone(),
            _ => None,
        });
        let proposed = s.trace.events().iter().any(|e| {
            matches!(&e.body, EventBody::TendencyInjected { option, .. } if option == "give_up")
        });
        let at_break = s.metrics.iter().find(|m| m.tick == BREAK_TICK).map(|m| m.winning_process.clone());
        // below the flip the give-up tendency wins; above it the task keeps
        // winning even though give-up is on offer
        sides.push(if gave_up {
            executed_by.as_deref() == Some("proc1")
        } else {
            proposed && executed_by.is_none() && at_break.as_deref() == Some("proc0")
        });
        abandoned.push(gave_up);
    }
    let monotone = abandoned.windows(2).all(|p| p[0] || !p[1]);
    let flips = abandoned.windows(2).filter(|p| p[0] != p[1]).count();
    let sides_ok = sides.iter().all(|b| *b);
    let flip_at = abandoned.iter().position(|a| !a).map(|i| weights[i]);
    verdict(
        "A4",
        "commitment weight threshold",
        monotone && flips == 1 && sides_ok,
        format!("abandoned over {weights:?} = {abandoned:?}, flip at weight {flip_at:?}, winner consistent with side {sides:?}"),
    )
}

/// Random case: options o0.., arguments a0.. with weights on a 0.1 grid;
/// an argument may undercut any earlier one, so undercuts form a DAG.
fn random_case(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<Argument>) {
    let n_opt = rng.random_range(1..=6);
    let n_arg = rng.random_range(0..=12);
    let options: Vec<String> = (0..n_opt).map(|i| format!("o{i}")).collect();
    let mut args = Vec::new();
    for i in 0..n_arg {
        let undercuts = (i > 0 && rng.random_bool(0.4)).then(|| format!("a{}", rng.random_range(0..i)));
        args.push(Argument {
            id: format!("a{i}"),
            option: options[rng.random_range(0..n_opt)].clone(),
            polarity: if rng.random_bool(0.5) { Polarity::Pro } else { Polarity::Con },
            weight: rng.random_range(0..=20) as f64 / 10.0,
            grounds: Vec::new(),
            source_process: "p".into(),
            undercuts,
        });
    }
    (options, args)
}

/// Every subset that is exactly the set of arguments with no attacker
/// inside it.
fn brute_fixed_points(args: &[Argument]) -> Vec<u32> {
    let n = args.len();
    let index: BTreeMap<&str, usize> = args.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
    let attackers: Vec<u32> = (0..n)
        .map(|t| {
            args.iter()
                .enumerate()
                .filter(|(_, a)| a.undercuts.as_deref().and_then(|u| index.get(u)) == Some(&t))
                .fold(0u32, |m, (i, _)| m | (1 << i))
        })
        .collect();
    (0u32..(1 << n))
        .filter(|&set| (0..n).all(|i| ((set >> i) & 1 == 1) == (set & attackers[i] == 0)))
        .collect()
}

fn tenths(w: f64) -> i64 {
    (w * 10.0).round() as i64
}

/// (ranking, net scores in tenths) from the unique fixed point.
fn oracle(options: &[String], args: &[Argument]) -> Option<(Vec<String>, BTreeMap<String, i64>)> {
    let fps = brute_fixed_points(args);
    if fps.len() != 1 {
        return None;
    }
    let mut net: BTreeMap<String, i64> = options.iter().map(|o| (o.clone(), 0)).collect();
    for (i, a) in args.iter().enumerate() {
        if (fps[0] >> i) & 1 == 1 {
            let w = tenths(a.weight);
            *net.get_mut(&a.option).unwrap() += if a.polarity == Polarity::Pro { w } else { -w };
        }
    }
    let mut ranking = options.to_vec();
    ranking.sort_by(|a, b| net[b].cmp(&net[a]).then(a.cmp(b)));
    Some((ranking, net))
}

fn a5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut mismatches = Vec::new();
    let total = 1000;
    for case in 0..total {
        let (options, args) = random_case(&mut rng);
        let expected = oracle(&options, &args);
        let got = aggregate(&options, &args);
        let same = match (&expected, &got) {
            (Some((ranking, net)), Ok(report)) => {
                report.ranking == *ranking
                    && report.recommended == ranking[0]
                    && report.scores.iter().all(|(o, s)| tenths(*s) == net[o] && (s * 10.0 - net[o] as f64).abs() < 1e-6)
            }
            _ => false,
        };
        if !same {
            mismatches.push(case);
        }
    }
    verdict(
        "A5",
        "aggregation matches exhaustive oracle",
        mismatches.is_empty(),
        format!("{} of {total} random cases disagree {:?}", mismatches.len(), &mismatches[..mismatches.len().min(5)]),
    )
}

/// Every simulation the criteria above perform.
fn all_runs() -> Vec<(String, Setup)> {
    let mut runs = vec![
        ("no_break".to_string(), no_break()),
        ("break_metacog_off".into(), with_break(false)),
        ("break_metacog_on".into(), with_break(true)),
    ];
    for w in sweep_weights() {
        runs.push((format!("redescription_w{w}"), redescription_run(w)));
    }
    for name in ["non_smoking", "office_cake"] {
        for on in [true, false] {
            runs.push((format!("{name}_metacog_{on}"), abstract_run(name, on)));
        }
    }
    runs
}

fn a6() -> Verdict {
    let mut violations = 0;
    let mut executed = 0;
    for (_, mut setup) in all_runs() {
        setup.profile = Some(BctProfile::Ceos);
        let s = setup.run();
        executed += count(&s, "ActionExecuted");
        violations += routing_violations(&s.trace);
    }
    verdict(
        "A6",
        "routing invariant under ceos",
        violations == 0 && executed > 0,
        format!("{violations} violations over {executed} executed actions"),
    )
}

fn a7() -> Verdict {
    let mut differing = Vec::new();
    let runs = all_runs();
    for (name, setup) in &runs {
        let digest = || {
            let s = setup.run();
            (sha256(s.trace.to_jsonl().as_bytes()), sha256(metrics_text(&s).as_bytes()))
        };
        if digest() != digest() {
            differing.push(name.clone());
        }
    }
    verdict(
        "A7",
        "determinism",
        differing.is_empty(),
        format!("{} runs repeated, differing: {differing:?}", runs.len()),
    )
}

fn a8() -> Verdict {
    let mut total = 0;
    let mut gaps = 0;
    for (_, setup) in all_runs() {
        let (t, g) = explanation_gaps(&setup.run());
        total += t;
        gaps += g;
    }
    verdict(
        "A8",
        "every selection is explained",
        gaps == 0 && total > 0,
        format!("{} of {total} OptionSelected events lack a resolvable argument", gaps),
    )
}

fn proc1_labels(s: &bctsim::agent::SimulationState) -> Vec<String> {
    s.trace
        .events()
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::AppraisalChange { process, label, .. } | EventBody::TendencyInjected { process, label, .. }
                if process == "proc1" =>
            {
                Some(label.clone())
            }
            _ => None,
        })
        .collect()
}

fn selected_options(s: &bctsim::agent::SimulationState) -> Vec<String> {
    s.trace
        .events()
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::OptionSelected { option, .. } => Some(option.clone()),
            _ => None,
        })
        .collect()
}

fn a9() -> Verdict {
    let cases = [
        ("non_smoking", ["bad mood", "cigarette", "calming", "plan to smoke"], "smoking", "avoid_smoking"),
        ("office_cake", ["problematic", "make an exception", "being friendly", "have cake"], "have_cake", "alternative"),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, labels, tempted, better) in cases {
        let on = abstract_run(name, true).run();
        let off = abstract_run(name, false).run();
        let seq = proc1_labels(&on);
        let labels_ok = seq == labels && proc1_labels(&off) == labels;
        let (chosen_on, chosen_off) = (selected_options(&on), selected_options(&off));
        let switched = chosen_on.first().map(String::as_str) == Some(better)
            && !chosen_on.iter().any(|o| o == tempted)
            && chosen_off.first().map(String::as_str) == Some(tempted);
        pass &= labels_ok && switched;
        detail.push(format!(
            "{name}: proc1 labels {seq:?}, first choice with/without metacognition {:?}/{:?}",
            chosen_on.first(),
            chosen_off.first()
        ));
    }
    verdict("A9", "abstract scenarios replay", pass, detail.join("; "))
}

fn main() {
    let verdicts = [a1(), a2(), a3(), a4(), a5(), a6(), a7(), a8(), a9()];
    for v in &verdicts {
        println!("{} {} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.id, v.title, v.detail);
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
