mod common;

use common::{brute_sim_vec, permute_refs, random_set, rng, tiny_config};
use proptest::prelude::*;
use simvec_metric::io::{normalize_judgment, read_cache, split_dataset, EmbeddingCache, EmbeddingSet};
use simvec_metric::model::{forward, init_params, score_sample, Aggregate, Arch, MetricConfig};
use simvec_metric::simvec::{extract_sim_vec, token_inputs, tokenize, Projections, SimVecMode, TokenSource};

fn vec_f32(d: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-4.0f32..4.0, d)
}

prop_compose! {
    fn embedding_set(max_d: usize, max_n: usize)
        (dc in 1..=max_d, dt in 1..=max_d, n in 1..=max_n)
        (image in vec_f32(dc), cand_clip in vec_f32(dc),
         refs_clip in prop::collection::vec(vec_f32(dc), n),
         cand_text in vec_f32(dt),
         refs_text in prop::collection::vec(vec_f32(dt), n)) -> EmbeddingSet {
        EmbeddingSet { image, cand_clip, refs_clip, cand_text, refs_text }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cache_round_trip_is_identity(sets in prop::collection::vec(embedding_set(6, 3), 1..5)) {
        // one cache holds a single pair of widths, so pad every set to the first one's
        let (dc, dt) = (sets[0].d_clip(), sets[0].d_text());
        let mut cache = EmbeddingCache::new(dc, dt);
        for (i, s) in sets.iter().enumerate() {
            let fit = |v: &Vec<f32>, d: usize| { let mut v = v.clone(); v.resize(d, 0.25); v };
            let s = EmbeddingSet {
                image: fit(&s.image, dc),
                cand_clip: fit(&s.cand_clip, dc),
                refs_clip: s.refs_clip.iter().map(|r| fit(r, dc)).collect(),
                cand_text: fit(&s.cand_text, dt),
                refs_text: s.refs_text.iter().map(|r| fit(r, dt)).collect(),
            };
            cache.insert(format!("id-{i}"), s).unwrap();
        }
        let back = EmbeddingCache::from_bytes(&cache.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back, cache);
    }

    #[test]
    fn split_is_a_partition(n in 0usize..400, seed in any::<u64>()) {
        let items: Vec<usize> = (0..n).collect();
        let (a, b, c) = split_dataset(items, [0.8, 0.1, 0.1], seed).unwrap();
        let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn sim_vec_matches_brute_force(e in embedding_set(8, 3)) {
        let f = extract_sim_vec(&e).unwrap();
        let (h_clip, dd_clip, h_text, dd_text) = brute_sim_vec(&e);
        prop_assert_eq!(&f.h_clip, &h_clip);
        prop_assert_eq!(&f.dd_clip, &dd_clip);
        prop_assert_eq!(&f.h_text, &h_text);
        prop_assert_eq!(&f.dd_text, &dd_text);
        for v in f.dd_clip.iter().chain(&f.dd_text).flatten() {
            prop_assert!(*v >= 0.0);
        }
    }

    #[test]
    fn full_mode_tokens_never_copy_raw_embeddings(e in embedding_set(6, 3)) {
        let inputs = extract_sim_vec(&e).unwrap().into_inputs();
        let raws: Vec<&Vec<f32>> = [&e.image, &e.cand_clip, &e.cand_text]
            .into_iter()
            .chain(e.refs_clip.iter())
            .chain(e.refs_text.iter())
            .collect();
        for item in &inputs.items {
            for raw in &raws {
                // equality would need every c_k·t_k or |c_k − t_k| to reproduce the raw value
                if item.values == **raw {
                    let trivially_equal = raw.iter().all(|&x| x == 0.0 || x == 1.0);
                    prop_assert!(trivially_equal, "{:?} copies a raw embedding", item.source);
                }
            }
        }
    }

    #[test]
    fn reference_order_is_equivariant(e in embedding_set(5, 4), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let n = e.n_refs();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng(seed));
        let a = extract_sim_vec(&e).unwrap().into_inputs();
        let b = extract_sim_vec(&permute_refs(&e, &order)).unwrap().into_inputs();
        prop_assert_eq!(a.items.len(), b.items.len());
        for (ia, item) in a.items.iter().enumerate() {
            let mapped = match item.source.reference() {
                None => item.source,
                Some(r) => {
                    let pos = order.iter().position(|&o| o == r).unwrap();
                    relabel(item.source, pos)
                }
            };
            let jb = b.items.iter().position(|t| t.source == mapped).unwrap();
            prop_assert_eq!(&a.items[ia].values, &b.items[jb].values);
            if item.source.reference().is_none() {
                prop_assert_eq!(ia, jb);
            }
        }
    }

    #[test]
    fn normalize_judgment_is_monotone(a in 1i64..=5, b in 1i64..=5) {
        let (x, y) = (normalize_judgment(a).unwrap(), normalize_judgment(b).unwrap());
        prop_assert_eq!(a.cmp(&b), x.partial_cmp(&y).unwrap());
        prop_assert!([0.0, 0.25, 0.5, 0.75, 1.0].contains(&x));
    }
}

fn relabel(s: TokenSource, i: usize) -> TokenSource {
    match s {
        TokenSource::ClipProductRef(_) => TokenSource::ClipProductRef(i),
        TokenSource::ClipDiffRef(_) => TokenSource::ClipDiffRef(i),
        TokenSource::TextProductRef(_) => TokenSource::TextProductRef(i),
        TokenSource::TextDiffRef(_) => TokenSource::TextDiffRef(i),
        TokenSource::RawRefClip(_) => TokenSource::RawRefClip(i),
        TokenSource::RawRefText(_) => TokenSource::RawRefText(i),
        other => other,
    }
}

fn configs() -> Vec<MetricConfig> {
    let mut out = Vec::new();
    for (arch, mode, agg) in [
        (Arch::Transformer, SimVecMode::Full, Aggregate::None),
        (Arch::Transformer, SimVecMode::RawFeatures, Aggregate::None),
        (Arch::MlpAblation, SimVecMode::Full, Aggregate::None),
        (Arch::Transformer, SimVecMode::Full, Aggregate::Max),
        (Arch::Transformer, SimVecMode::Full, Aggregate::Mean),
    ] {
        out.push(tiny_config(6, 5, arch, mode, agg));
    }
    out
}

#[test]
fn scores_lie_strictly_inside_unit_interval() {
    let mut r = rng(21);
    for cfg in configs() {
        for seed in 0..20 {
            let params = init_params(&cfg, seed).unwrap();
            let e = random_set(&mut r, 6, 5, 1 + (seed as usize % 4));
            let y = score_sample(&e, &params, &cfg).unwrap();
            assert!(y > 0.0 && y < 1.0, "{y}");
        }
    }
    // saturating inputs still stay inside (0, 1) at f64
    let cfg = configs().remove(0);
    let params = init_params(&cfg, 1).unwrap();
    let mut e = random_set(&mut r, 6, 5, 2);
    e.cand_clip.iter_mut().for_each(|x| *x *= 50.0);
    let y = score_sample(&e, &params, &cfg).unwrap();
    assert!(y > 0.0 && y < 1.0);
}

#[test]
fn attention_rows_sum_to_one() {
    let cfg = MetricConfig::desk(16, 12);
    let params = init_params(&cfg, 3).unwrap();
    let mut r = rng(5);
    for n in 1..=4 {
        let e = random_set(&mut r, 16, 12, n);
        let inputs = token_inputs(&e, &cfg.simvec).unwrap();
        let (_, trace) = forward(&inputs, &params, &cfg.model).unwrap();
        assert_eq!(trace.layers.len(), 3);
        for layer in &trace.layers {
            assert_eq!(layer.probs.len(), 4);
            for head in &layer.probs {
                for i in 0..head.rows {
                    let s: f64 = head.row(i).iter().sum();
                    assert!((s - 1.0).abs() < 1e-6, "row sum {s}");
                }
            }
        }
    }
}

#[test]
fn replay_reproduces_score_bit_exactly() {
    let mut r = rng(8);
    for cfg in configs().into_iter().filter(|c| c.model.aggregate == Aggregate::None) {
        let params = init_params(&cfg, 4).unwrap();
        let p32 = params.cast::<f32>();
        for n in 1..=3 {
            let e = random_set(&mut r, 6, 5, n);
            let inputs = token_inputs(&e, &cfg.simvec).unwrap();
            let (y, trace) = forward(&inputs, &params, &cfg.model).unwrap();
            assert_eq!(trace.replay(&params, &cfg.model).unwrap().to_bits(), y.to_bits());
            let (y32, trace32) = forward(&inputs, &p32, &cfg.model).unwrap();
            assert_eq!(trace32.replay(&p32, &cfg.model).unwrap().to_bits(), y32.to_bits());
        }
    }
}

#[test]
fn mlp_ablation_ignores_token_order() {
    use rand::seq::SliceRandom;
    let cfg = tiny_config(6, 5, Arch::MlpAblation, SimVecMode::Full, Aggregate::None);
    let params = init_params(&cfg, 9).unwrap();
    let mut r = rng(10);
    for _ in 0..20 {
        let e = random_set(&mut r, 6, 5, 3);
        let inputs = token_inputs(&e, &cfg.simvec).unwrap();
        let (y, _) = forward(&inputs, &params, &cfg.model).unwrap();
        // shuffle whole tokens across groups, which the transformer layout would care about
        let mut shuffled = inputs.clone();
        shuffled.items.shuffle(&mut r);
        let (ys, _) = forward(&shuffled, &params, &cfg.model).unwrap();
        assert!((y - ys).abs() < 1e-12, "{y} vs {ys}");
    }
}

#[test]
fn tokenize_places_cls_first_and_projects_by_width() {
    let cfg = tiny_config(6, 5, Arch::Transformer, SimVecMode::Full, Aggregate::None);
    let params = init_params(&cfg, 2).unwrap();
    let e = random_set(&mut rng(3), 6, 5, 2);
    let inputs = token_inputs(&e, &cfg.simvec).unwrap();
    let tokens = tokenize(&inputs, &params.projections, &params.cls).unwrap();
    assert_eq!(tokens.tokens.row(0), &params.cls[..]);
    assert_eq!(tokens.len(), 4 * 2 + 3);
    let proj: &Projections<f64> = &params.projections;
    for (row, item) in inputs.items.iter().enumerate() {
        let x: Vec<f64> = item.values.iter().map(|&v| f64::from(v)).collect();
        let expect = proj.for_width(item.width).apply_vec(&x);
        assert_eq!(tokens.tokens.row(row + 1), &expect[..]);
    }
}

#[test]
fn reads_cache_written_outside_rust() {
    // bytes produced by fixtures/make_cache_fixture.py from the layout alone
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/cache_v1.svec");
    let cache = read_cache(path).unwrap();
    assert_eq!((cache.d_clip(), cache.d_text(), cache.len()), (3, 2, 2));
    let mut k = 0i32;
    let mut next = |d: usize| -> Vec<f32> {
        let v = (0..d as i32).map(|i| (k + i - 10) as f32 / 8.0).collect();
        k += d as i32;
        v
    };
    for (id, n) in [("a", 1), ("img/2", 2)] {
        let image = next(3);
        let cand_clip = next(3);
        let refs_clip = (0..n).map(|_| next(3)).collect();
        let cand_text = next(2);
        let refs_text = (0..n).map(|_| next(2)).collect();
        let want = EmbeddingSet {
            image,
            cand_clip,
            refs_clip,
            cand_text,
            refs_text,
        };
        assert_eq!(cache.require(id).unwrap(), &want, "{id}");
    }
    assert_eq!(cache.to_bytes().unwrap(), std::fs::read(path).unwrap());
}
