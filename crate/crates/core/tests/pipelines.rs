mod common;

use common::*;
use ovcd::model::{BBox, BiTemporalPair, Temporal};
use ovcd::{run_pipeline, run_tiled};

#[test]
fn mci_recovers_planted_building() {
    let cfg = mci_config();
    let r = run_pipeline(
        &planted_pair(),
        &cfg.vocabulary,
        &cfg.pipeline,
        &components(&cfg),
    )
    .unwrap();
    assert_eq!(r.class_map, footprint(SIZE, SIZE, &[(PLANTED, 1)]));
    assert_eq!(r.instances.len(), 1);
    let inst = &r.instances.masks[0];
    assert_eq!(inst.temporal(), Temporal::T2);
    assert_eq!(inst.class_label(), Some("building"));
    assert!(inst.change_score().unwrap() > 0.0);
}

#[test]
fn imc_recovers_planted_building() {
    let cfg = imc_config();
    let r = run_pipeline(
        &planted_pair(),
        &cfg.vocabulary,
        &cfg.pipeline,
        &components(&cfg),
    )
    .unwrap();
    assert_eq!(r.class_map, footprint(SIZE, SIZE, &[(PLANTED, 1)]));
}

#[test]
fn identical_pair_gives_nothing() {
    for cfg in [mci_config(), imc_config()] {
        let r = run_pipeline(
            &identical_pair(),
            &cfg.vocabulary,
            &cfg.pipeline,
            &components(&cfg),
        )
        .unwrap();
        assert!(r.class_map.is_all_zero(), "{:?}", cfg.pipeline.framework);
        assert!(r.instances.is_empty());
    }
}

#[test]
fn red_object_is_change_but_not_building() {
    let t1 = grass(SIZE, SIZE);
    let t2 = t1.with_rect(BBox::new(8, 8, 24, 24), &RED).unwrap();
    let pair = BiTemporalPair::new("red", t1, t2).unwrap();
    for cfg in [mci_config(), imc_config()] {
        let r = run_pipeline(&pair, &cfg.vocabulary, &cfg.pipeline, &components(&cfg)).unwrap();
        assert!(r.class_map.is_all_zero(), "{:?}", cfg.pipeline.framework);
    }
}

#[test]
fn suite_results_per_pair() {
    for cfg in [mci_config(), imc_config()] {
        let comps = components(&cfg);
        for pair in fixture_suite() {
            let r = run_pipeline(&pair, &cfg.vocabulary, &cfg.pipeline, &comps).unwrap();
            let expected = match pair.pair_id.as_str() {
                "planted" => footprint(SIZE, SIZE, &[(PLANTED, 1)]),
                "appear_two" => footprint(
                    SIZE,
                    SIZE,
                    &[(BBox::new(8, 8, 24, 24), 1), (BBox::new(40, 40, 56, 56), 1)],
                ),
                "disappear" => footprint(SIZE, SIZE, &[(BBox::new(8, 40, 32, 56), 1)]),
                _ => footprint(SIZE, SIZE, &[]),
            };
            assert_eq!(
                r.class_map, expected,
                "{} {:?}",
                pair.pair_id, cfg.pipeline.framework
            );
        }
    }
}

#[test]
fn tiled_run_matches_full_run_when_stride_divides_tile() {
    for mut cfg in [mci_config(), imc_config()] {
        let comps = components(&cfg);
        for pair in fixture_suite() {
            let full = run_pipeline(&pair, &cfg.vocabulary, &cfg.pipeline, &comps).unwrap();
            cfg.pipeline.tile_size = Some(32);
            let tiled = run_tiled(&pair, &cfg.vocabulary, &cfg.pipeline, &comps).unwrap();
            cfg.pipeline.tile_size = None;
            assert_eq!(tiled.class_map, full.class_map, "{}", pair.pair_id);
        }
    }
}
