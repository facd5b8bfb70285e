use std::collections::{BTreeMap, BTreeSet};

use aqa_core::attributes::*;
use aqa_core::dsp::ReverbParams;
use aqa_core::questengine::*;
use aqa_core::scenegen::{global_bucket, SceneSpec, SoundEvent};
use aqa_core::seed::rng_for;
use aqa_core::soundbank::Split;
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;

type Attrs = (Instrument, Note, Brightness, Loudness);

/// Scene with back-to-back events of 1 s separated by 0.2 s gaps.
fn scene_of(id: &str, attrs: &[Attrs]) -> SceneSpec {
    let n = attrs.len();
    let total = n as f64 * 1.0 + (n + 1) as f64 * 0.2;
    let events = attrs
        .iter()
        .enumerate()
        .map(|(k, &(instrument, note, brightness_label, loudness_label))| {
            let onset_s = 0.2 + k as f64 * 1.2;
            SoundEvent {
                sound_id: format!("s{k}"),
                instrument,
                note,
                octave: 4,
                brightness_label,
                loudness_label,
                duration_s: 1.0,
                onset_s,
                absolute_position: k + 1,
                global_position: global_bucket(onset_s, total),
            }
        })
        .collect();
    SceneSpec {
        scene_id: id.to_string(),
        split: Split::Train,
        events,
        silence_gaps_s: vec![0.2; n + 1],
        reverb: ReverbParams { rt60_s: 0.3, ir_length_s: 0.3, wet_dry: 0.3, seed: 0 },
        noise_snr_db: None,
        noise_seed: 0,
        total_duration_s: total,
        audio_path: format!("{id}.wav"),
    }
}

fn random_scene(rng: &mut impl Rng, id: &str) -> SceneSpec {
    let n = rng.random_range(5..=15);
    let attrs: Vec<Attrs> = (0..n)
        .map(|_| {
            (
                *Instrument::ALL.choose(rng).unwrap(),
                *Note::ALL.choose(rng).unwrap(),
                *Brightness::ALL.choose(rng).unwrap(),
                *Loudness::ALL.choose(rng).unwrap(),
            )
        })
        .collect();
    scene_of(id, &attrs)
}

fn node(op: Op, arg: Option<&str>, inputs: &[usize]) -> Node {
    Node::new(op, arg, inputs)
}

const BRIGHT: Brightness = Brightness::Bright;
const DARK: Brightness = Brightness::Dark;
const LOUD: Loudness = Loudness::Loud;
const QUIET: Loudness = Loudness::Quiet;

#[test]
fn count_of_a_seven_event_scene() {
    let s = scene_of("s", &[(Instrument::Bass, Note::A, BRIGHT, LOUD); 7]);
    let p = vec![node(Op::Scene, None, &[]), node(Op::Count, None, &[0])];
    assert_eq!(execute(&p, &s).unwrap(), "7");
    assert_eq!(execute_naive(&p, &s).unwrap(), "7");
}

#[test]
fn exist_without_flute_is_no() {
    let s = scene_of("s", &[(Instrument::Bass, Note::A, BRIGHT, LOUD), (Instrument::Cello, Note::B, DARK, QUIET)]);
    let p =
        vec![node(Op::Scene, None, &[]), node(Op::FilterInstrument, Some("flute"), &[0]), node(Op::Exist, None, &[1])];
    assert_eq!(execute(&p, &s).unwrap(), "no");
    assert_eq!(execute_naive(&p, &s).unwrap(), "no");
}

#[test]
fn second_violin_note() {
    let s = scene_of(
        "s",
        &[
            (Instrument::Violin, Note::C, BRIGHT, LOUD),
            (Instrument::Flute, Note::D, BRIGHT, LOUD),
            (Instrument::Violin, Note::E, DARK, LOUD),
            (Instrument::Violin, Note::G, DARK, QUIET),
        ],
    );
    let p = vec![
        node(Op::Scene, None, &[]),
        node(Op::FilterInstrument, Some("violin"), &[0]),
        node(Op::Nth, Some("2"), &[1]),
        node(Op::QueryNote, None, &[2]),
    ];
    assert_eq!(execute(&p, &s).unwrap(), "E");
    assert_eq!(execute_naive(&p, &s).unwrap(), "E");
    let mut p4 = p.clone();
    p4[2].arg = Some("4".into());
    assert_eq!(execute(&p4, &s), Err(ExecError::IllPosed(IllPosed::NthOutOfRange { k: 4, len: 3 })));
    assert_eq!(execute_naive(&p4, &s), execute(&p4, &s));
}

#[test]
fn relations_and_relative_position() {
    let s = scene_of(
        "s",
        &[
            (Instrument::Trumpet, Note::C, BRIGHT, LOUD),
            (Instrument::Violin, Note::F, DARK, LOUD),
            (Instrument::Trumpet, Note::F, DARK, QUIET),
            (Instrument::Trumpet, Note::G, BRIGHT, QUIET),
        ],
    );
    // Among the trumpet sounds which one is a F?
    let p = vec![
        node(Op::Scene, None, &[]),
        node(Op::FilterInstrument, Some("trumpet"), &[0]),
        node(Op::FilterNote, Some("F"), &[1]),
        node(Op::Unique, None, &[2]),
        node(Op::QueryRelativePosition, None, &[3, 1]),
    ];
    assert_eq!(execute(&p, &s).unwrap(), "second");
    // How many sounds after the violin?
    let q = vec![
        node(Op::Scene, None, &[]),
        node(Op::FilterInstrument, Some("violin"), &[0]),
        node(Op::Unique, None, &[1]),
        node(Op::RelateAfter, None, &[2]),
        node(Op::Count, None, &[3]),
    ];
    assert_eq!(execute(&q, &s).unwrap(), "2");
    // A relation anchored on a set of three trumpets has no single anchor.
    let r = vec![
        node(Op::Scene, None, &[]),
        node(Op::FilterInstrument, Some("trumpet"), &[0]),
        node(Op::RelateBefore, None, &[1]),
        node(Op::Count, None, &[2]),
    ];
    assert_eq!(execute(&r, &s), Err(ExecError::IllPosed(IllPosed::AnchorUnresolved { found: 3 })));
    assert_eq!(execute_naive(&r, &s), execute(&r, &s));
    let cmp = vec![
        node(Op::Scene, None, &[]),
        node(Op::FilterInstrument, Some("trumpet"), &[0]),
        node(Op::Count, None, &[1]),
        node(Op::FilterLoudness, Some("loud"), &[0]),
        node(Op::Count, None, &[3]),
        node(Op::CompareMore, None, &[2, 4]),
    ];
    assert_eq!(execute(&cmp, &s).unwrap(), "yes");
    let mut distinct = q.clone();
    distinct[4].op = Op::CountDistinctInstruments;
    distinct[3].op = Op::RelateBefore;
    assert_eq!(execute(&distinct, &s).unwrap(), "1");
}

#[test]
fn empty_filter_chains_count_zero() {
    let s = scene_of("s", &[(Instrument::Bass, Note::A, BRIGHT, LOUD); 5]);
    let p = vec![
        node(Op::Scene, None, &[]),
        node(Op::FilterInstrument, Some("cello"), &[0]),
        node(Op::FilterNote, Some("C"), &[1]),
        node(Op::Count, None, &[2]),
    ];
    assert_eq!(execute(&p, &s).unwrap(), "0");
    assert_eq!(execute_naive(&p, &s).unwrap(), "0");
    let empty = scene_of("e", &[]);
    assert_eq!(execute(&p, &empty).unwrap(), "0");
    assert_eq!(execute_naive(&p, &empty).unwrap(), "0");
}

#[test]
fn malformed_programs_are_invalid() {
    let s = scene_of("s", &[(Instrument::Bass, Note::A, BRIGHT, LOUD); 5]);
    let bad_arg =
        vec![node(Op::Scene, None, &[]), node(Op::FilterInstrument, Some("kazoo"), &[0]), node(Op::Count, None, &[1])];
    let forward = vec![node(Op::Count, None, &[1]), node(Op::Scene, None, &[])];
    let no_answer = vec![node(Op::Scene, None, &[])];
    let query_on_set = vec![node(Op::Scene, None, &[]), node(Op::QueryNote, None, &[0])];
    for p in [bad_arg, forward, no_answer, query_on_set] {
        assert!(matches!(execute(&p, &s), Err(ExecError::Invalid(_))), "{p:?}");
        assert!(matches!(execute_naive(&p, &s), Err(ExecError::Invalid(_))), "{p:?}");
    }
}

#[test]
fn bundled_templates() {
    let templates = builtin_templates();
    assert_eq!(templates.len(), 77);
    for t in QuestionType::ALL {
        let of_type: Vec<&Template> = templates.iter().filter(|x| x.question_type == t).collect();
        assert!(of_type.len() >= 6, "{t}");
        let temporal = of_type.iter().filter(|x| x.program_skeleton.iter().any(|n| n.op == "relate")).count();
        if t == QuestionType::Exist {
            // Anchors can fail, so exist stays anchor-free.
            assert!(of_type
                .iter()
                .all(|x| x.program_skeleton.iter().all(|n| !matches!(n.op.as_str(), "relate" | "nth" | "unique"))));
        } else {
            assert!(temporal >= 1 && temporal < of_type.len(), "{t}: {temporal}");
        }
    }
}

#[test]
fn template_validation_catches_mistakes() {
    let good = r#"[{"template_id": "t", "question_type": "exist", "text_pattern": "Is there a <I>?",
        "program_skeleton": [{"op": "scene"}, {"op": "filter_instrument", "arg": "<I>", "inputs": [0]}, {"op": "exist", "inputs": [1]}]}]"#;
    assert_eq!(parse_templates(good).unwrap().len(), 1);
    let unknown = good.replace("Is there a <I>?", "Is there a <I> <Q>?");
    assert!(parse_templates(&unknown).is_err());
    let wrong_terminal = good.replace("\"exist\", \"text", "\"count\", \"text");
    assert!(parse_templates(&wrong_terminal).is_err());
    let dangling = good.replace("\"inputs\": [1]", "\"inputs\": [5]");
    assert!(parse_templates(&dangling).is_err());
}

fn template(id: &str) -> Template {
    builtin_templates().into_iter().find(|t| t.template_id == id).unwrap()
}

#[test]
fn table_exist_example() {
    let s = scene_of(
        "s",
        &[
            (Instrument::Cello, Note::D, DARK, LOUD),
            (Instrument::Bass, Note::CSharp, BRIGHT, QUIET),
            (Instrument::Flute, Note::A, BRIGHT, LOUD),
        ],
    );
    let t = template("exist_01");
    let b: Bindings = [("<I>", "bass"), ("<B>", "bright"), ("<N>", "C#")]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let (text, program) = resolve(&t, &b).unwrap();
    assert_eq!(text, "Is there a bass playing a bright C# note?");
    assert_eq!(execute(&program, &s).unwrap(), "yes");
}

#[test]
fn exist_is_never_rejected() {
    let mut rng = rng_for(3, "exist", 0);
    let exists: Vec<Template> =
        builtin_templates().into_iter().filter(|t| t.question_type == QuestionType::Exist).collect();
    for i in 0..200 {
        let s = random_scene(&mut rng, &format!("s{i}"));
        for t in &exists {
            let r = instantiate(t, &s, &mut rng);
            assert!(r.is_ok(), "{} {:?}", t.template_id, r.err());
        }
    }
}

#[test]
fn ambiguous_unique_is_rejected() {
    // Three violins in every third of the scene.
    let s = scene_of("s", &[(Instrument::Violin, Note::C, BRIGHT, LOUD); 9]);
    let t = template("note_07");
    let mut rng = rng_for(5, "ambiguous", 0);
    for _ in 0..50 {
        assert!(matches!(instantiate(&t, &s, &mut rng), Err(Rejected::IllPosed(IllPosed::NotUnique { .. }))));
    }
}

#[test]
fn order_blind_questions_are_rejected() {
    // Every event is identical, so any order-dependent answer is constant.
    let s = scene_of("s", &[(Instrument::Cello, Note::E, DARK, QUIET); 6]);
    let t = template("brightness_02");
    let mut rng = rng_for(6, "degenerate", 0);
    assert_eq!(instantiate(&t, &s, &mut rng).unwrap_err(), Rejected::Degenerate);
}

fn uniform_bindings(t: &Template, rng: &mut impl Rng) -> Bindings {
    t.placeholders()
        .into_iter()
        .map(|p| {
            let stem = p.trim_start_matches('<').trim_end_matches('>').trim_end_matches(|c: char| c.is_ascii_digit());
            let v = match stem {
                "I" => Instrument::ALL.choose(rng).unwrap().to_string(),
                "N" => Note::ALL.choose(rng).unwrap().to_string(),
                "B" => Brightness::ALL.choose(rng).unwrap().to_string(),
                "L" => Loudness::ALL.choose(rng).unwrap().to_string(),
                "GP" => GlobalPosition::ALL.choose(rng).unwrap().to_string(),
                "O" => ordinal(rng.random_range(1..=6)).unwrap().to_string(),
                _ => ["before", "after"].choose(rng).unwrap().to_string(),
            };
            (p, v)
        })
        .collect()
}

#[test]
fn oracles_agree_on_a_thousand_pairs() {
    let templates = builtin_templates();
    let mut rng = rng_for(11, "oracle", 0);
    let (mut answered, mut ill) = (0, 0);
    for i in 0..1000 {
        let s = random_scene(&mut rng, &format!("s{i}"));
        let t = templates.choose(&mut rng).unwrap();
        let (_, program) = resolve(t, &uniform_bindings(t, &mut rng)).unwrap();
        let a = execute(&program, &s);
        assert_eq!(a, execute_naive(&program, &s), "{} on scene {i}", t.template_id);
        if a.is_ok() {
            answered += 1;
        } else {
            ill += 1;
        }
    }
    // Both branches of the contract are exercised.
    assert!(answered > 200 && ill > 100, "{answered} / {ill}");
}

fn arb_program() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
    prop::collection::vec((any::<u8>(), any::<u8>(), any::<u8>()), 1..10)
}

/// Grows a well-typed program from random choices; the terminal is picked
/// from whatever the last value can feed.
fn build_program(choices: &[(u8, u8, u8)], term: u8) -> Vec<Node> {
    let mut p = vec![node(Op::Scene, None, &[])];
    let mut sets = vec![0usize];
    let mut events: Vec<usize> = Vec::new();
    let filters = [
        (Op::FilterInstrument, Instrument::ALL.iter().map(|x| x.label()).collect::<Vec<_>>()),
        (Op::FilterNote, Note::ALL.iter().map(|x| x.label()).collect()),
        (Op::FilterBrightness, Brightness::ALL.iter().map(|x| x.label()).collect()),
        (Op::FilterLoudness, Loudness::ALL.iter().map(|x| x.label()).collect()),
        (Op::FilterGlobalPosition, GlobalPosition::ALL.iter().map(|x| x.label()).collect()),
    ];
    for &(kind, a, b) in choices {
        let src = sets[a as usize % sets.len()];
        let i = p.len();
        match kind % 5 {
            0 | 1 => {
                let (op, vals) = &filters[b as usize % filters.len()];
                p.push(node(*op, Some(vals[a as usize % vals.len()]), &[src]));
                sets.push(i);
            }
            2 => {
                p.push(node(Op::Nth, Some(&(1 + b as usize % 5).to_string()), &[src]));
                events.push(i);
            }
            3 => {
                p.push(node(Op::Unique, None, &[src]));
                events.push(i);
            }
            _ => {
                let anchor = events.last().copied().unwrap_or(src);
                let op = if b % 2 == 0 { Op::RelateBefore } else { Op::RelateAfter };
                p.push(node(op, None, &[anchor]));
                sets.push(i);
            }
        }
    }
    let last_set = *sets.last().unwrap();
    let i = p.len();
    match (events.last(), term % 9) {
        (Some(&e), 0) => p.push(node(Op::QueryNote, None, &[e])),
        (Some(&e), 1) => p.push(node(Op::QueryAbsolutePosition, None, &[e])),
        (Some(&e), 2) => p.push(node(Op::QueryRelativePosition, None, &[e, last_set])),
        (Some(&e), 3) => p.push(node(Op::QueryGlobalPosition, None, &[e])),
        (_, 4) => p.push(node(Op::CountDistinctInstruments, None, &[last_set])),
        (_, 5) => p.push(node(Op::Exist, None, &[last_set])),
        (_, 6) => {
            p.push(node(Op::Count, None, &[last_set]));
            p.push(node(Op::Count, None, &[sets[0]]));
            p.push(node([Op::CompareEqual, Op::CompareMore, Op::CompareFewer][term as usize % 3], None, &[i, i + 1]));
        }
        _ => p.push(node(Op::Count, None, &[last_set])),
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn random_programs_agree(choices in arb_program(), term in any::<u8>(), seed in any::<u64>()) {
        let mut rng = rng_for(seed, "scene", 0);
        let s = random_scene(&mut rng, "p");
        let p = build_program(&choices, term);
        prop_assert!(validate(&p).is_ok());
        prop_assert_eq!(execute(&p, &s), execute_naive(&p, &s));
    }

    #[test]
    fn generated_records_are_sound(seed in any::<u64>()) {
        let templates = builtin_templates();
        let mut rng = rng_for(seed, "gen", 0);
        let s = random_scene(&mut rng, "g");
        let records = match generate_questions(&s, &templates, 4, &mut rng) {
            Ok(r) => r,
            Err(QuestionError::Exhausted { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        prop_assert_eq!(records.len(), 4);
        prop_assert_eq!(records.iter().map(|r| &r.template_id).collect::<BTreeSet<_>>().len(), 4);
        for r in &records {
            prop_assert_eq!(execute(&r.program, &s).unwrap(), r.answer.clone());
            prop_assert!(r.question_type.answers().contains(&r.answer));
            prop_assert!(label_index(&r.answer).is_some());
            prop_assert_eq!(r.has_temporal_relation, has_temporal_relation(&r.program));
        }
    }
}

fn run(n_scenes: usize, seed: u64) -> (Vec<SceneSpec>, RunOutput) {
    let mut rng = rng_for(seed, "run-scenes", 0);
    let scenes: Vec<SceneSpec> = (0..n_scenes).map(|i| random_scene(&mut rng, &format!("train_{i:06}"))).collect();
    let out = generate_run(&scenes, &builtin_templates(), &GenerationConfig::default(), seed);
    (scenes, out)
}

#[test]
fn large_run_properties() {
    let (scenes, out) = run(600, 21);
    assert!(out.exhausted.is_empty(), "{:?}", out.exhausted);
    assert_eq!(out.records.len(), 600 * 4);

    let by_id: BTreeMap<&str, &SceneSpec> = scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    for r in &out.records {
        assert_eq!(execute(&r.program, by_id[r.scene_id.as_str()]).unwrap(), r.answer);
    }
    let types: BTreeSet<QuestionType> = out.records.iter().map(|r| r.question_type).collect();
    assert_eq!(types.len(), 11);
    let labels: BTreeSet<&str> = label_set().iter().map(String::as_str).collect();
    assert!(out.records.iter().all(|r| labels.contains(r.answer.as_str())));

    // Caps: no (type, answer) pair beyond three times its uniform share.
    let mut pairs: BTreeMap<(QuestionType, &str), usize> = BTreeMap::new();
    for r in &out.records {
        *pairs.entry((r.question_type, r.answer.as_str())).or_default() += 1;
    }
    let balancer = Balancer::new(out.records.len(), 3.0);
    let over: usize = pairs.iter().map(|((t, _), &c)| c.saturating_sub(balancer.cap(*t))).sum();
    assert_eq!(over, out.overflow);
    assert!(out.overflow * 100 <= out.records.len(), "{}", out.overflow);

    let vocab = vocabulary(&out.records);
    assert!((60..=120).contains(&vocab.len()), "{}", vocab.len());
    assert_eq!(&vocab[..2], &[PAD.to_string(), UNK.to_string()]);
    assert!(vocab.contains(&"c#".to_string()));
    assert!(!vocab.iter().any(|t| t.contains('?')));
    assert!(out.records.iter().any(|r| r.has_temporal_relation));
    assert!(out.records.iter().any(|r| !r.has_temporal_relation));
}

#[test]
fn runs_are_reproducible() {
    let (_, a) = run(40, 8);
    let (_, b) = run(40, 8);
    assert_eq!(a.records, b.records);
    let (_, c) = run(40, 9);
    assert_ne!(a.records, c.records);
}

#[test]
fn label_set_and_guess_floor() {
    let labels = label_set();
    assert_eq!(labels.len(), LABEL_COUNT);
    assert_eq!(labels.iter().collect::<BTreeSet<_>>().len(), labels.len());
    for t in QuestionType::ALL {
        for a in t.answers() {
            assert!(label_index(&a).is_some());
        }
    }
    let floor = 100.0 / labels.len() as f64;
    assert!((floor - 1.724).abs() < 1e-3);
}

#[test]
fn jsonl_round_trip() {
    let (_, out) = run(5, 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("questions").join("train.jsonl");
    write_qa_jsonl(&path, &QaHeader::new("train"), &out.records).unwrap();
    let (header, back) = read_qa_jsonl(&path).unwrap();
    assert_eq!(header.labels.len(), LABEL_COUNT);
    assert_eq!(header.split, "train");
    assert_eq!(back, out.records);
    let first_line = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
    assert!(first_line.contains("\"labels\""));
}

#[test]
fn vocabulary_encoding() {
    let (_, out) = run(20, 4);
    let v = Vocabulary::from_records(&out.records);
    let ids = v.encode(&out.records[0].text);
    assert!(!ids.is_empty() && ids.iter().all(|&i| i >= 2 && i < v.len()));
    assert_eq!(v.encode("zebra"), vec![v.unk_id()]);
    let json = serde_json::to_string(&v).unwrap();
    let back: Vocabulary = serde_json::from_str(&json).unwrap();
    assert_eq!(back.encode(&out.records[1].text), v.encode(&out.records[1].text));
}
