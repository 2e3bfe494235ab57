use levelforge_core::blend::{interpolate, latent_mean, reconstruct, Interpolation};
use levelforge_core::corpus::synthetic::write_reference_corpus;
use levelforge_core::corpus::{CorpusSplit, SegmentArchive, DEFAULT_RATIOS};
use levelforge_core::embedding::one_hot_table;
use levelforge_core::explorer::{BlendRequest, Session, API_VERSION};
use levelforge_core::fixtures::{overfit_segments, overfit_table};
use levelforge_core::tiles::{TileCatalog, UnifiedTile};
use levelforge_core::vae::{build_model, train, NetworkSpec, OutputKind, TrainConfig};

fn fixture_session() -> Session {
    let catalog = TileCatalog::default();
    let table = overfit_table(&catalog, 4).unwrap();
    let segs = overfit_segments();
    let spec = NetworkSpec::fc_scaled(table.dim(), vec![32, 16], 8, OutputKind::Linear);
    let config = TrainConfig {
        epochs: 30,
        learning_rate: 1e-3,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let split = CorpusSplit::train_only(segs.clone(), 0);
    let (model, _) = train(build_model(&spec, 4).unwrap(), &split, &table, &config).unwrap();
    Session::new(model, table, &SegmentArchive::new(&segs, &split), catalog).unwrap()
}

fn req(a: &str, b: &str, t: f64) -> BlendRequest {
    serde_json::from_value(serde_json::json!({"a": a, "b": b, "t": t})).unwrap()
}

#[test]
fn reference_archive_listing() {
    let dir = tempfile::tempdir().unwrap();
    write_reference_corpus(dir.path(), 0).unwrap();
    let catalog = TileCatalog::default();
    let archive = SegmentArchive::prepare(dir.path(), &catalog, DEFAULT_RATIOS, 0).unwrap();
    let tiles: Vec<UnifiedTile> = catalog.tiles().cloned().collect();
    let table = one_hot_table(&tiles).unwrap();
    let spec = NetworkSpec::fc_scaled(table.dim(), vec![8], 2, OutputKind::TileSoftmax);
    let session = Session::new(build_model(&spec, 0).unwrap(), table, &archive, catalog).unwrap();
    assert_eq!(session.list_segments(Some("LR")).unwrap().segments.len(), 600);
    assert_eq!(session.list_segments(Some("LOZ")).unwrap().segments.len(), 459);
    let all = session.list_segments(Some("all")).unwrap();
    assert_eq!(all.segments.len(), 1059);
    assert_eq!(all, session.list_segments(None).unwrap());
    assert_eq!(all.version, API_VERSION);
    assert_eq!(session.list_segments(Some("SMB")).unwrap_err().status, 400);
}

#[test]
fn blend_endpoints_and_midpoint() {
    let s = fixture_session();
    let segs = overfit_segments();
    let (a, b) = (segs[1].id(), segs[6].id());
    let at0 = s.blend(&req(&a, &b, 0.0)).unwrap();
    assert_eq!(at0.tiles, reconstruct(&s.model, &s.table, &segs[1]).unwrap().to_lines());
    let at1 = s.blend(&req(&a, &b, 1.0)).unwrap();
    assert_eq!(at1.tiles, reconstruct(&s.model, &s.table, &segs[6]).unwrap().to_lines());

    let mid = s.blend(&req(&a, &b, 0.5)).unwrap();
    let ma = latent_mean(&s.model, &s.table, &segs[1]).unwrap();
    let mb = latent_mean(&s.model, &s.table, &segs[6]).unwrap();
    for ((x, y), z) in ma.iter().zip(&mb).zip(&mid.debug.latent) {
        assert!(((x + y) / 2.0 - z).abs() < 1e-12);
    }
    assert_eq!(mid.debug.latent, interpolate(&ma, &mb, 0.5, Interpolation::Linear));
    assert_eq!(mid, s.blend(&req(&a, &b, 0.5)).unwrap());
    assert_eq!(mid.t, Some(0.5));
}

#[test]
fn blend_errors() {
    let s = fixture_session();
    let a = overfit_segments()[0].id();
    assert_eq!(s.blend(&req(&a, "nope", 0.5)).unwrap_err().status, 404);
    assert_eq!(s.blend(&req(&a, &a, 1.5)).unwrap_err().status, 422);
    assert_eq!(s.blend(&req(&a, &a, -0.1)).unwrap_err().status, 422);
}

#[test]
fn random_seeds() {
    let s = fixture_session();
    let r = s.random(Some(17)).unwrap();
    assert_eq!(r.seed, Some(17));
    assert_eq!(r, s.random(Some(17)).unwrap());
    let drawn = s.random(None).unwrap();
    let seed = drawn.seed.expect("a drawn seed is echoed");
    assert_eq!(drawn.tiles, s.random(Some(seed)).unwrap().tiles);
}

#[test]
fn concurrent_requests_match_sequential_ones() {
    let s = fixture_session();
    let ids: Vec<String> = overfit_segments().iter().map(|x| x.id()).collect();
    let expected: Vec<_> = (0..8)
        .map(|i| s.blend(&req(&ids[i], &ids[7 - i], i as f64 / 7.0)).unwrap())
        .collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..8)
            .rev()
            .map(|i| {
                let s = &s;
                let ids = &ids;
                scope.spawn(move || (i, s.blend(&req(&ids[i], &ids[7 - i], i as f64 / 7.0)).unwrap()))
            })
            .collect();
        for h in handles {
            let (i, got) = h.join().unwrap();
            assert_eq!(got, expected[i]);
        }
    });
}

#[test]
fn health_reports_version() {
    let h = fixture_session().health();
    assert_eq!(h["version"], API_VERSION);
    assert_eq!(h["segments"], 8);
}
