use std::fs;
use std::path::{Path, PathBuf};

use levelforge_core::blend::{blend_pair_with, random_generate_seeded, Interpolation};
use levelforge_core::corpus::synthetic::write_reference_corpus;
use levelforge_core::corpus::{Segment, SegmentArchive, DEFAULT_RATIOS};
use levelforge_core::embedding::{one_hot_table, synth_table, EmbeddingTable};
use levelforge_core::manifest::{blend_manifest, load_manifest, manifest_segments, manifest_to_json, random_manifest};
use levelforge_core::metrics::{aggregate, e_distance, metric_vector, write_metrics_csv, MetricTileSets, MetricVector};
use levelforge_core::playability::{playability_report, Agents};
use levelforge_core::render::{render_text, save_png, RenderMode};
use levelforge_core::tiles::{TileCatalog, UnifiedTile};
use levelforge_core::vae::{
    build_model, load_checkpoint_file, save_checkpoint_file, train_with_hook, NetworkSpec, OutputKind, TrainConfig,
    Variant,
};
use levelforge_core::{Error, Result};

use crate::config::{merge, RunConfig};
use crate::{
    BlendArgs, Cli, Command, EvalArgs, Failure, GenerateArgs, PrepareArgs, RenderArgs, RenderOpts, ServeArgs,
    TableArgs, TableKind, TrainArgs, VariantArg,
};

const DEFAULT_SCALE: u32 = 8;

/// Resolved global settings: flags override the config file.
pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Ctx<'_> {
    fn pick(&self, flag: &Option<PathBuf>, file: &Option<PathBuf>, default: &str) -> PathBuf {
        flag.clone()
            .or_else(|| file.clone())
            .unwrap_or_else(|| self.out.join(default))
    }

    fn table_path(&self, flag: &Option<PathBuf>) -> PathBuf {
        self.pick(flag, &self.cfg.table, "table.json")
    }

    fn archive_path(&self, flag: &Option<PathBuf>) -> PathBuf {
        self.pick(flag, &self.cfg.archive, "archive.json")
    }

    fn checkpoint_path(&self, flag: &Option<PathBuf>) -> PathBuf {
        self.pick(flag, &self.cfg.checkpoint, "model.json")
    }

    fn catalog(&self, flag: &Option<PathBuf>) -> Result<TileCatalog> {
        match flag.as_ref().or(self.cfg.mapping.as_ref()) {
            Some(p) => TileCatalog::load(p),
            None => Ok(TileCatalog::default()),
        }
    }

    fn render_mode(&self, opts: &RenderOpts) -> Option<RenderMode> {
        match opts.render {
            Some(r) => r.into(),
            None => Some(self.cfg.render.unwrap_or_default()),
        }
    }

    fn scale(&self, opts: &RenderOpts) -> u32 {
        opts.scale.or(self.cfg.scale).unwrap_or(DEFAULT_SCALE)
    }

    fn out_dir(&self) -> Result<&Path> {
        create_dir(&self.out)?;
        Ok(&self.out)
    }
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(format!("creating {}", p.display()), e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} {} does not exist",
            path.display()
        )))
    }
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn run(cli: &Cli, cfg: &RunConfig) -> Result<(), Failure> {
    let ctx = Ctx {
        cfg,
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        out: cli
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| "out".into()),
    };
    let r = match &cli.command {
        Command::MakeCorpus => make_corpus(&ctx),
        Command::Table(a) => table(&ctx, a),
        Command::Prepare(a) => prepare(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Generate(a) => generate(&ctx, a),
        Command::Blend(a) => blend(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Render(a) => render(&ctx, a),
        Command::Serve(a) => crate::serve::serve(&ctx, a, load_session(&ctx, a)?),
    };
    r.map_err(Failure::from)
}

fn make_corpus(ctx: &Ctx) -> Result<()> {
    let out = ctx.out_dir()?;
    write_reference_corpus(out, ctx.seed)?;
    log::info!("wrote reference corpus under {}", out.display());
    Ok(())
}

fn table(ctx: &Ctx, args: &TableArgs) -> Result<()> {
    let catalog = ctx.catalog(&args.mapping)?;
    let tiles: Vec<UnifiedTile> = catalog.tiles().cloned().collect();
    let table = match args.kind {
        TableKind::OneHot => one_hot_table(&tiles)?,
        TableKind::Synth => synth_table(&tiles, args.dim, ctx.seed)?,
    };
    let path = ctx.out_dir()?.join("table.json");
    table.save(&path)?;
    log::info!("wrote {} ({} tiles, dim {})", path.display(), table.len(), table.dim());
    Ok(())
}

fn prepare(ctx: &Ctx, args: &PrepareArgs) -> Result<()> {
    let corpus = args
        .corpus
        .clone()
        .or_else(|| ctx.cfg.corpus.clone())
        .ok_or_else(|| Error::InvalidArgument("no corpus directory given".into()))?;
    if !corpus.is_dir() {
        return Err(Error::InvalidArgument(format!(
            "corpus {} is not a directory",
            corpus.display()
        )));
    }
    let catalog = ctx.catalog(&args.mapping)?;
    let archive = SegmentArchive::prepare(&corpus, &catalog, DEFAULT_RATIOS, ctx.seed)?;
    let path = ctx.out_dir()?.join("archive.json");
    archive.save(&path)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn network_spec(ctx: &Ctx, args: &TrainArgs, table: &EmbeddingTable) -> Result<NetworkSpec> {
    let output = if table.is_one_hot() {
        OutputKind::TileSoftmax
    } else {
        OutputKind::Linear
    };
    let base = match args.variant {
        VariantArg::Fc => NetworkSpec::fc_default(table.dim(), output),
        VariantArg::Cnn => NetworkSpec::cnn_default(table.dim(), output),
    };
    let mut spec = merge(&base, &ctx.cfg.network, "network")?;
    if let Some(w) = &args.widths {
        spec.dense_widths = w.clone();
    }
    if let Some(l) = args.latent {
        spec.latent_dim = l;
    }
    if spec.tile_dim != table.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.tile_dim,
            found: table.dim(),
        });
    }
    if spec.variant == Variant::Cnn && spec.conv_filters.is_empty() {
        return Err(Error::InvalidSpec("CNN network without convolutions".into()));
    }
    spec.validate()?;
    Ok(spec)
}

fn train_config(ctx: &Ctx, args: &TrainArgs, table: &EmbeddingTable) -> Result<TrainConfig> {
    let base = TrainConfig {
        seed: ctx.seed,
        ..TrainConfig::for_table(table)
    };
    let mut config = merge(&base, &ctx.cfg.train, "train")?;
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        config.batch_size = b;
    }
    if let Some(c) = args.checkpoint_every {
        config.checkpoint_every = c;
    }
    config.validate()?;
    Ok(config)
}

fn train(ctx: &Ctx, args: &TrainArgs) -> Result<()> {
    let archive_path = ctx.archive_path(&args.archive);
    let table_path = ctx.table_path(&args.table);
    require(&archive_path, "archive")?;
    require(&table_path, "table")?;
    let archive = SegmentArchive::load(&archive_path)?;
    let table = EmbeddingTable::load(&table_path)?;
    let spec = network_spec(ctx, args, &table)?;
    let config = train_config(ctx, args, &table)?;
    let split = archive.corpus_split()?;
    let out = ctx.out_dir()?.to_path_buf();
    let ckpt_dir = out.join("checkpoints");
    if config.checkpoint_every > 0 {
        create_dir(&ckpt_dir)?;
    }
    let model = build_model(&spec, ctx.seed)?;
    log::info!(
        "training {:?} on {} segments for {} epochs",
        spec.variant,
        split.train.len(),
        config.epochs
    );
    let (model, history) = train_with_hook(model, &split.train, &table, &config, |epoch, model, rec| {
        log::info!("epoch {} total {:.6}", epoch + 1, rec.total);
        if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
            save_checkpoint_file(model, ckpt_dir.join(format!("epoch_{:04}.json", epoch + 1)))?;
        }
        Ok(())
    })?;
    save_checkpoint_file(&model, out.join("model.json"))?;
    history.save_csv(out.join("history.csv"))?;
    Ok(())
}

fn load_model_and_table(
    ctx: &Ctx,
    checkpoint: &Option<PathBuf>,
    table: &Option<PathBuf>,
) -> Result<(levelforge_core::vae::VaeModel, EmbeddingTable)> {
    let ckpt = ctx.checkpoint_path(checkpoint);
    let table = ctx.table_path(table);
    require(&ckpt, "checkpoint")?;
    require(&table, "table")?;
    Ok((load_checkpoint_file(&ckpt)?, EmbeddingTable::load(&table)?))
}

fn write_renders(ctx: &Ctx, opts: &RenderOpts, items: &[(String, Segment)], table: &EmbeddingTable) -> Result<()> {
    let Some(mode) = ctx.render_mode(opts) else {
        return Ok(());
    };
    let dir = ctx.out_dir()?.join("renders");
    create_dir(&dir)?;
    let scale = ctx.scale(opts);
    for (id, seg) in items {
        match mode {
            RenderMode::Text => write(&dir.join(format!("{id}.txt")), &render_text(seg))?,
            RenderMode::Image => save_png(seg, table, scale, dir.join(format!("{id}.png")))?,
        }
    }
    Ok(())
}

fn generate(ctx: &Ctx, args: &GenerateArgs) -> Result<()> {
    let (model, table) = load_model_and_table(ctx, &args.checkpoint, &args.table)?;
    let segments = random_generate_seeded(&model, &table, args.n, ctx.seed)?;
    let manifest = random_manifest(&segments, ctx.seed);
    write(&ctx.out_dir()?.join("manifest.json"), &manifest_to_json(&manifest))?;
    let items: Vec<(String, Segment)> = manifest.iter().map(|e| e.id.clone()).zip(segments).collect();
    write_renders(ctx, &args.render, &items, &table)
}

fn archive_segment(archive: &SegmentArchive, id: &str) -> Result<Segment> {
    archive
        .segment(id)
        .unwrap_or_else(|| Err(Error::InvalidArgument(format!("unknown segment id {id:?}"))))
}

fn blend(ctx: &Ctx, args: &BlendArgs) -> Result<()> {
    let (model, table) = load_model_and_table(ctx, &args.checkpoint, &args.table)?;
    let archive_path = ctx.archive_path(&args.archive);
    require(&archive_path, "archive")?;
    let archive = SegmentArchive::load(&archive_path)?;
    let a = archive_segment(&archive, &args.a)?;
    let b = archive_segment(&archive, &args.b)?;
    let mode = if args.slerp {
        Interpolation::Spherical
    } else {
        Interpolation::Linear
    };
    let result = blend_pair_with(&model, &table, &a, &b, args.steps, mode)?;
    let manifest = blend_manifest(&result, ctx.seed);
    write(&ctx.out_dir()?.join("manifest.json"), &manifest_to_json(&manifest))?;
    let items: Vec<(String, Segment)> = manifest
        .iter()
        .zip(&result.steps)
        .map(|(e, s)| (e.id.clone(), s.segment.clone()))
        .collect();
    write_renders(ctx, &args.render, &items, &table)
}

fn eval(ctx: &Ctx, args: &EvalArgs) -> Result<()> {
    let catalog = ctx.catalog(&None)?;
    let entries = load_manifest(&args.manifest)?;
    let items =
        manifest_segments(&entries, &catalog).map_err(|e| Error::in_file(args.manifest.display().to_string(), e))?;
    let sets = match args.metric_sets.as_ref().or(ctx.cfg.metric_sets.as_ref()) {
        Some(p) => MetricTileSets::load(p)?,
        None => MetricTileSets::default(),
    };
    sets.validate(&catalog)?;
    let rows: Vec<(String, MetricVector)> = items
        .iter()
        .map(|(id, s)| (id.clone(), metric_vector(s, &sets)))
        .collect();
    let vectors: Vec<MetricVector> = rows.iter().map(|r| r.1).collect();

    // the reference distribution is optional when no archive is configured
    let explicit = args.archive.is_some() || ctx.cfg.archive.is_some();
    let archive_path = ctx.archive_path(&args.archive);
    let e_dist = if explicit || archive_path.exists() {
        require(&archive_path, "archive")?;
        let train = SegmentArchive::load(&archive_path)?.corpus_split()?.train;
        let reference: Vec<MetricVector> = train.iter().map(|s| metric_vector(s, &sets)).collect();
        Some(e_distance(&vectors, &reference)?)
    } else {
        None
    };

    let segments: Vec<Segment> = items.into_iter().map(|(_, s)| s).collect();
    let mut report = playability_report(&segments, &catalog, &Agents::default())?;
    for (v, e) in report.per_segment.iter_mut().zip(&entries) {
        v.id = e.id.clone();
    }

    let out = ctx.out_dir()?;
    let csv_path = out.join("metrics.csv");
    let f = fs::File::create(&csv_path).map_err(|e| Error::io(format!("writing {}", csv_path.display()), e))?;
    write_metrics_csv(&rows, f)?;
    let summary = serde_json::json!({
        "n": report.n,
        "metrics": aggregate(&vectors)?,
        "e_distance": e_dist,
        "lr_astar_pct": report.lr_astar_pct,
        "loz_astar_pct": report.loz_astar_pct,
        "lr_like": report.lr_like,
        "loz_like": report.loz_like,
    });
    write(&out.join("summary.json"), &json_line(&summary))?;
    write(&out.join("playability.json"), &json_line(&report))?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn render(ctx: &Ctx, args: &RenderArgs) -> Result<()> {
    let catalog = ctx.catalog(&None)?;
    let mut items: Vec<(String, Segment)> = match &args.manifest {
        Some(p) => manifest_segments(&load_manifest(p)?, &catalog)?,
        None => {
            let path = ctx.archive_path(&args.archive);
            require(&path, "archive")?;
            SegmentArchive::load(&path)?
                .segments()?
                .into_iter()
                .map(|s| (s.id(), s))
                .collect()
        }
    };
    if !args.id.is_empty() {
        if let Some(missing) = args.id.iter().find(|id| !items.iter().any(|(i, _)| i == *id)) {
            return Err(Error::InvalidArgument(format!("unknown segment id {missing:?}")));
        }
        items.retain(|(id, _)| args.id.contains(id));
    }
    let table = match ctx.render_mode(&args.render) {
        Some(RenderMode::Image) => {
            let p = ctx.table_path(&args.table);
            require(&p, "table")?;
            EmbeddingTable::load(&p)?
        }
        _ => {
            let tiles: Vec<UnifiedTile> = catalog.tiles().cloned().collect();
            one_hot_table(&tiles)?
        }
    };
    write_renders(ctx, &args.render, &items, &table)
}

fn load_session(ctx: &Ctx, args: &ServeArgs) -> Result<levelforge_core::explorer::Session, Failure> {
    let (model, table) = load_model_and_table(ctx, &args.checkpoint, &args.table)?;
    let archive_path = ctx.archive_path(&args.archive);
    require(&archive_path, "archive")?;
    let archive = SegmentArchive::load(&archive_path)?;
    let catalog = ctx.catalog(&None)?;
    Ok(levelforge_core::explorer::Session::new(
        model, table, &archive, catalog,
    )?)
}
