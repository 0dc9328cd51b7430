use diffcore::{ParamStore, Tape, Tensor};
use graphref::agents::{AgentConfig, Agents};
use graphref::channel::{ArgmaxChannel, SoftChannel};
use graphref::rng::stream;
use graphref::worldgen::{GameSpec, GraphSample, Input, PerceptualSpec, RelationalSpec, ReprKind};
use rand::seq::SliceRandom;

fn config(repr: ReprKind) -> AgentConfig {
    AgentConfig {
        repr,
        hidden_size: 16,
        embedding_size: 8,
        vocab_size: 5,
        message_len: 3,
        ..AgentConfig::default()
    }
}

fn param<'a>(store: &'a ParamStore, name: &str) -> &'a Tensor {
    store.iter().find(|(_, n, _)| *n == name).map(|(_, _, t)| t).unwrap()
}

fn random_graphs(n: usize, count: usize, seed: u64) -> Vec<GraphSample> {
    let spec = RelationalSpec::new(n).unwrap();
    let mut rng = stream(seed, "graphs", 0);
    (0..count).map(|_| spec.sample(&mut rng).unwrap()).collect()
}

#[test]
fn graph_encoders_ignore_node_order() {
    let n = 6;
    let dims = GameSpec::G2(RelationalSpec::new(n).unwrap()).input_dims();
    let variants = [("gcn", "mean", "sum"), ("gcn", "mean", "max"), ("sage", "mean", "mean"), ("sage", "pool", "max"), ("sage", "gcn", "sum")];
    let mut rng = stream(1, "perm", 0);
    for (layer, agg, pool) in variants {
        let cfg = AgentConfig {
            graph_layer: layer.into(),
            sage_aggregator: agg.into(),
            pooling: pool.into(),
            ..config(ReprKind::Graph)
        };
        let (agents, params) = Agents::build(&cfg, dims, 3).unwrap();
        for g in random_graphs(n, 10, 2) {
            let mut relabeled = vec![Input::Graph(g.clone())];
            for _ in 0..10 {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                relabeled.push(Input::Graph(g.relabel(&perm).unwrap()));
            }
            let refs: Vec<&Input> = relabeled.iter().collect();
            let mut tape = Tape::with_params(&params);
            let e = agents.speaker.encoder().encode(&mut tape, &refs).unwrap();
            let e = tape.value(e);
            for r in 1..e.rows() {
                for (a, b) in e.row_slice(0).iter().zip(e.row_slice(r)) {
                    assert!((a - b).abs() < 1e-9, "{layer}/{agg}/{pool}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn listener_closed_form_softmax() {
    let dims = GameSpec::G2(RelationalSpec::new(3).unwrap()).input_dims();
    let (agents, params) = Agents::build(&config(ReprKind::Graph), dims, 0).unwrap();
    let mut tape = Tape::with_params(&params);
    let u = tape.constant(Tensor::row(vec![1.0, 0.0]));
    let c = tape.constant(Tensor::from_rows(&[vec![2f64.ln(), 5.0], vec![0.0, -3.0]]).unwrap());
    let p = agents.listener.score(&mut tape, u, c, &[vec![0, 1]]).unwrap();
    let p = tape.value(p).data().to_vec();
    assert!((p[0] - 2.0 / 3.0).abs() < 1e-12 && (p[1] - 1.0 / 3.0).abs() < 1e-12, "{p:?}");
}

#[test]
fn identical_candidates_are_equally_likely() {
    let spec = PerceptualSpec::new(vec![3, 3]).unwrap();
    let game = GameSpec::G1 { dims: spec.clone() };
    let obj = graphref::worldgen::PerceptualObject::new(vec![1, 2], &spec).unwrap();
    for repr in ReprKind::ALL {
        let (agents, params) = Agents::build(&config(repr), game.input_dims(), 4).unwrap();
        let input = graphref::worldgen::Sample::G1(obj.clone()).represent(&game, repr).unwrap();
        let cands: Vec<&Input> = vec![&input; 5];
        let mut tape = Tape::with_params(&params);
        let u = agents.listener.read_symbols(&mut tape, &[&[0, 3, 1]]).unwrap();
        let e = agents.listener.embed(&mut tape, &cands).unwrap();
        let p = agents.listener.score(&mut tape, u, e, &[vec![0, 1, 2, 3, 4]]).unwrap();
        for &x in tape.value(p).data() {
            assert!((x - 0.2).abs() < 1e-12, "{repr}: {x}");
        }
    }
}

#[test]
fn decoder_is_deterministic_and_rows_are_distributions() {
    let game = GameSpec::G1 { dims: PerceptualSpec::new(vec![3, 3]).unwrap() };
    let (agents, params) = Agents::build(&config(ReprKind::Bow), game.input_dims(), 5).unwrap();
    let input = Input::Bow(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let run = |seed| {
        let mut tape = Tape::with_params(&params);
        let mut rng = stream(seed, "noise", 0);
        let utt = agents.speaker.speak(&mut tape, &[&input], &ArgmaxChannel, &mut rng).unwrap();
        let logits: Vec<Vec<f64>> = utt.logits.iter().map(|&l| tape.value(l).data().to_vec()).collect();
        let probs: Vec<Vec<f64>> = utt
            .logits
            .iter()
            .map(|&l| {
                let p = tape.softmax_rows(l);
                tape.value(p).data().to_vec()
            })
            .collect();
        (logits, probs, utt.symbols)
    };
    let (a, pa, sa) = run(1);
    let (b, _, sb) = run(2);
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert_eq!(a.len(), 3);
    for row in pa {
        assert_eq!(row.len(), 5);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn soft_channel_messages_have_distribution_rows() {
    let game = GameSpec::G1 { dims: PerceptualSpec::new(vec![3, 3]).unwrap() };
    let (agents, params) = Agents::build(&config(ReprKind::Seq), game.input_dims(), 6).unwrap();
    let input = Input::Seq { tokens: vec![0, 4], vocab: 6 };
    let mut tape = Tape::with_params(&params);
    let mut rng = stream(0, "noise", 0);
    let utt = agents.speaker.speak(&mut tape, &[&input, &input], &SoftChannel, &mut rng).unwrap();
    for &s in &utt.steps {
        let v = tape.value(s);
        for r in 0..v.rows() {
            assert!((v.row_slice(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn bow_zero_vector_gives_bias_path() {
    let game = GameSpec::G1 { dims: PerceptualSpec::new(vec![3, 3]).unwrap() };
    let (agents, params) = Agents::build(&config(ReprKind::Bow), game.input_dims(), 7).unwrap();
    let mut tape = Tape::with_params(&params);
    let zero = Input::Bow(vec![0.0; 6]);
    let e = agents.speaker.encoder().encode(&mut tape, &[&zero]).unwrap();
    let got = tape.value(e).data().to_vec();

    let b1 = param(&params, "speaker.encoder.l1.b").data();
    let w2 = param(&params, "speaker.encoder.l2.w");
    let b2 = param(&params, "speaker.encoder.l2.b").data();
    let h: Vec<f64> = b1.iter().map(|x| x.max(0.0)).collect();
    for j in 0..w2.cols() {
        let expect: f64 = b2[j] + (0..h.len()).map(|i| h[i] * w2.at(i, j)).sum::<f64>();
        assert!((got[j] - expect).abs() < 1e-12);
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    let game = GameSpec::G1 { dims: PerceptualSpec::new(vec![3, 3]).unwrap() };
    let (bow, bp) = Agents::build(&config(ReprKind::Bow), game.input_dims(), 0).unwrap();
    let mut tape = Tape::with_params(&bp);
    assert!(bow.speaker.encoder().encode(&mut tape, &[&Input::Bow(vec![1.0; 4])]).is_err());
    assert!(bow.speaker.encoder().encode(&mut tape, &[&Input::Seq { tokens: vec![0], vocab: 6 }]).is_err());

    let (seq, sp) = Agents::build(&config(ReprKind::Seq), game.input_dims(), 0).unwrap();
    let mut tape = Tape::with_params(&sp);
    assert!(seq.speaker.encoder().encode(&mut tape, &[&Input::Seq { tokens: vec![0, 9], vocab: 6 }]).is_err());
}

#[test]
fn restore_round_trips_and_checks_shapes() {
    let game = GameSpec::G1 { dims: PerceptualSpec::new(vec![3, 3]).unwrap() };
    let cfg = config(ReprKind::Graph);
    let (_, params) = Agents::build(&cfg, game.input_dims(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.bin");
    params.save(&path).unwrap();
    let loaded = ParamStore::load(&path).unwrap();
    let (_, restored) = Agents::restore(&cfg, game.input_dims(), &loaded).unwrap();
    for ((_, na, a), (_, nb, b)) in params.iter().zip(restored.iter()) {
        assert_eq!(na, nb);
        assert_eq!(a, b);
    }
    let wider = AgentConfig { hidden_size: 32, ..cfg };
    assert!(Agents::restore(&wider, game.input_dims(), &loaded).is_err());
}
