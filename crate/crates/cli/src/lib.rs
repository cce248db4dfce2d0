//! Command line around the vesselpose library: calibrate a camera from
//! keypoints, fuse AIS logs with detections into 3D box annotations,
//! evaluate against ground truth, generate synthetic scenes, and render
//! annotation overlays.
//!
//! Exit codes: 0 success, 1 data error (unreadable records, inconsistent
//! inputs), 2 configuration error (missing files, bad flags, geometry too
//! degenerate to calibrate).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use vesselpose::ais::decode_log_lines;
use vesselpose::camera::{
    estimate_homography, pca_interim_plane, solve_pnp, water_tangent_plane, CameraError,
    CameraModel, Correspondence, PixelProjector, Refinement,
};
use vesselpose::evalkit::{
    iou_summary, matching_report, reprojection_table, reprojection_text_table,
};
use vesselpose::geodesy::{geodetic_to_ecef, GeodeticCoord};
use vesselpose::io::{
    read_jsonl, write_jsonl, AnnotationRecord, CameraModelRecord, DetectionRecord, ImageRecord,
    IntrinsicsRecord, IoError, KeypointRecord, TruthRecord,
};
use vesselpose::pipeline::{run_fusion, FusionConfig};
use vesselpose::synth::{generate_scene, merge_scenes, write_scene, SceneSpec, SynthError};
use vesselpose::Vec2;

pub const CAMERAS_FILE: &str = "cameras.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const OUTCOMES_FILE: &str = "outcomes.jsonl";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";

#[derive(Parser)]
#[command(
    name = "vesselpose",
    version,
    about = "AIS + monocular detections -> 6D vessel poses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register cameras from keypoints and print the reprojection table.
    Calibrate(CalibrateArgs),
    /// Fuse an AIS log with 2D detections into 3D box annotations.
    Fuse(FuseArgs),
    /// Score annotations against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic scene from a spec file.
    Synth(SynthArgs),
    /// Render annotation overlays as SVG files.
    Render(RenderArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    /// Keypoint records (JSONL), one per 2D-3D correspondence.
    #[arg(long)]
    keypoints: PathBuf,
    /// Intrinsics file (JSONL) holding exactly one record.
    #[arg(long)]
    intrinsics: PathBuf,
    /// Output directory for the camera model file.
    #[arg(long)]
    out: PathBuf,
    /// Water surface ellipsoidal height, meters (anchors the water-plane
    /// homography baseline).
    #[arg(long, default_value_t = 0.0)]
    water_height_m: f64,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    keypoints: PathBuf,
    #[arg(long)]
    intrinsics: PathBuf,
    /// Image records (JSONL) with capture times and viewports.
    #[arg(long)]
    images: PathBuf,
    /// Timestamped AIVDM log: `<seconds> <sentence>` per line.
    #[arg(long)]
    ais_log: PathBuf,
    /// Detection records (JSONL).
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    water_height_m: f64,
    /// Exclusive theta cutoff for accepting an association.
    #[arg(long, default_value_t = 0.35)]
    match_threshold: f64,
    /// Maximum AIS position age at image time, seconds.
    #[arg(long, default_value_t = 10.0)]
    ais_max_age_s: f64,
    /// Border proximity that drops the width cost term, pixels.
    #[arg(long, default_value_t = 2.0)]
    border_margin_px: f64,
    /// Minimum detection score admitted to matching.
    #[arg(long, default_value_t = 0.05)]
    score_floor: f64,
    /// Detection classes to keep (repeatable); all classes when absent.
    #[arg(long = "class")]
    classes: Vec<String>,
    /// Worker threads; 0 means one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth records (JSONL).
    #[arg(long)]
    truth: PathBuf,
    /// Annotation records (JSONL) produced by `fuse`.
    #[arg(long)]
    annotations: PathBuf,
    /// Directory for report.txt and report.json; stdout only when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene spec: JSON holding one spec or an array sharing a camera.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the spec seed (array specs get seed, seed+1, ...).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    annotations: PathBuf,
    /// Image records (JSONL); listed images get a canvas even when empty.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Canvas width, pixels.
    #[arg(long)]
    width: u32,
    /// Canvas height, pixels.
    #[arg(long)]
    height: u32,
}

enum CliError {
    /// Exit 1: records that cannot be trusted or reconciled.
    Data(String),
    /// Exit 2: missing inputs, bad flags, degenerate geometry.
    Config(String),
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::File { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CameraError> for CliError {
    fn from(e: CameraError) -> Self {
        match e {
            CameraError::DegenerateGeometry(_) | CameraError::InvalidIntrinsics(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<vesselpose::pipeline::PipelineError> for CliError {
    fn from(e: vesselpose::pipeline::PipelineError) -> Self {
        CliError::Data(e.to_string())
    }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 2;
        }
    };
    let result = match cli.command {
        Command::Calibrate(args) => cmd_calibrate(&args),
        Command::Fuse(args) => cmd_fuse(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Render(args) => cmd_render(&args),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

fn read_intrinsics(path: &Path) -> Result<IntrinsicsRecord, CliError> {
    let records: Vec<IntrinsicsRecord> = read_jsonl(path)?;
    match records.as_slice() {
        [one] => Ok(one.clone()),
        other => Err(CliError::Config(format!(
            "{} must hold exactly one intrinsics record, found {}",
            path.display(),
            other.len()
        ))),
    }
}

fn correspondences(keypoints: &[KeypointRecord]) -> Vec<Correspondence> {
    keypoints
        .iter()
        .map(|kp| Correspondence {
            world: geodetic_to_ecef(&GeodeticCoord {
                lat_deg: kp.lat_deg,
                lon_deg: kp.lon_deg,
                height_m: kp.height_m,
            }),
            pixel: Vec2::new(kp.u_px, kp.v_px),
        })
        .collect()
}

/// Solves PnP per viewport. Keypoints are grouped by `viewport_id`; the
/// single intrinsics record applies to every viewport.
fn calibrate_viewports(
    keypoints: &[KeypointRecord],
    intrinsics: &IntrinsicsRecord,
) -> Result<BTreeMap<u32, CameraModel>, CliError> {
    let intr = intrinsics.to_intrinsics();
    let mut by_viewport: BTreeMap<u32, Vec<KeypointRecord>> = BTreeMap::new();
    for kp in keypoints {
        by_viewport
            .entry(kp.viewport_id)
            .or_default()
            .push(kp.clone());
    }
    if by_viewport.is_empty() {
        return Err(CliError::Config("keypoints file holds no records".into()));
    }
    let mut models = BTreeMap::new();
    for (viewport, kps) in by_viewport {
        let corrs = correspondences(&kps);
        let model = solve_pnp(&corrs, &intr).map_err(|e| match CliError::from(e) {
            CliError::Config(m) => CliError::Config(format!("viewport {viewport}: {m}")),
            CliError::Data(m) => CliError::Data(format!("viewport {viewport}: {m}")),
        })?;
        models.insert(viewport, model);
    }
    Ok(models)
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let keypoints: Vec<KeypointRecord> = read_jsonl(&args.keypoints)?;
    let intrinsics = read_intrinsics(&args.intrinsics)?;
    let models = calibrate_viewports(&keypoints, &intrinsics)?;
    ensure_dir(&args.out)?;

    let records: Vec<CameraModelRecord> = models
        .iter()
        .map(|(v, m)| CameraModelRecord::from_model(*v, m))
        .collect();
    write_jsonl(&args.out.join(CAMERAS_FILE), &records)?;

    for (viewport, model) in &models {
        let kps: Vec<KeypointRecord> = keypoints
            .iter()
            .filter(|k| k.viewport_id == *viewport)
            .cloned()
            .collect();
        let corrs = correspondences(&kps);
        let mean_lat = kps.iter().map(|k| k.lat_deg).sum::<f64>() / kps.len() as f64;
        let mean_lon = kps.iter().map(|k| k.lon_deg).sum::<f64>() / kps.len() as f64;
        let water = water_tangent_plane(mean_lat, mean_lon, args.water_height_m);
        let worlds: Vec<_> = corrs.iter().map(|c| c.world).collect();

        let mut entries: Vec<(&str, &dyn PixelProjector)> = vec![("PnP", model)];
        let h_water = estimate_homography(&water, &corrs, Refinement::Geometric);
        if let Ok(h) = &h_water {
            entries.push(("homography (water plane)", h));
        }
        let h_pca = pca_interim_plane(&worlds)
            .and_then(|plane| estimate_homography(&plane, &corrs, Refinement::Geometric));
        if let Ok(h) = &h_pca {
            entries.push(("homography (PCA plane)", h));
        }
        let rows = reprojection_table(&entries, &corrs, intrinsics.width, intrinsics.height);
        println!("viewport {viewport} ({} keypoints)", corrs.len());
        print!("{}", reprojection_text_table(&rows));
    }
    println!(
        "wrote {} camera model(s) to {}",
        models.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_fuse(args: &FuseArgs) -> Result<(), CliError> {
    let keypoints: Vec<KeypointRecord> = read_jsonl(&args.keypoints)?;
    let intrinsics = read_intrinsics(&args.intrinsics)?;
    let images: Vec<ImageRecord> = read_jsonl(&args.images)?;
    let detections: Vec<DetectionRecord> = read_jsonl(&args.detections)?;
    let log = std::fs::read_to_string(&args.ais_log)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.ais_log.display())))?;

    let models = calibrate_viewports(&keypoints, &intrinsics)?;
    let (messages, stats) = decode_log_lines(log.lines());

    let cfg = FusionConfig {
        water_height_m: args.water_height_m,
        match_threshold: args.match_threshold,
        ais_max_age_s: args.ais_max_age_s,
        border_margin_px: args.border_margin_px,
        score_floor: args.score_floor,
        class_filter: if args.classes.is_empty() {
            None
        } else {
            Some(args.classes.iter().cloned().collect::<BTreeSet<String>>())
        },
    };
    let output = run_fusion(&models, &images, &detections, &messages, &cfg, args.workers)?;

    ensure_dir(&args.out)?;
    write_jsonl(&args.out.join(ANNOTATIONS_FILE), &output.annotations)?;
    write_jsonl(&args.out.join(OUTCOMES_FILE), &output.outcomes)?;
    println!(
        "fused {} image(s): {} annotation(s), {} outcome record(s), \
         {} AIS message(s) ({} undecodable line(s)), {} orphan detection(s)",
        images.len(),
        output.annotations.len(),
        output.outcomes.len(),
        messages.len(),
        stats.errors.len(),
        output.orphan_detections,
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let truths: Vec<TruthRecord> = read_jsonl(&args.truth)?;
    let annotations: Vec<AnnotationRecord> = read_jsonl(&args.annotations)?;
    let report = matching_report(&truths, &annotations);
    let iou = iou_summary(&report.correct_ious);

    let mut text = report.text_table();
    text.push_str(&format!(
        "\nIoU over correct matches: n={} mean={:.4} q1={:.4} median={:.4} q3={:.4} \
         good={} ok={} bad={}\n",
        iou.count, iou.mean, iou.q1, iou.median, iou.q3, iou.good, iou.ok, iou.bad
    ));
    print!("{text}");

    if let Some(out) = &args.out {
        ensure_dir(out)?;
        std::fs::write(out.join(REPORT_TEXT_FILE), &text)
            .map_err(|e| CliError::Config(format!("cannot write report: {e}")))?;
        let json = serde_json::json!({ "matching": report, "iou": iou });
        std::fs::write(out.join(REPORT_JSON_FILE), format!("{:#}\n", json))
            .map_err(|e| CliError::Config(format!("cannot write report: {e}")))?;
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.spec.display())))?;
    let mut specs: Vec<SceneSpec> = match serde_json::from_str::<SceneSpec>(&raw) {
        Ok(one) => vec![one],
        Err(_) => serde_json::from_str(&raw)
            .map_err(|e| CliError::Config(format!("{}: {e}", args.spec.display())))?,
    };
    if let Some(seed) = args.seed {
        for (i, spec) in specs.iter_mut().enumerate() {
            spec.seed = seed + i as u64;
        }
    }
    for pair in specs.windows(2) {
        if pair[0].camera != pair[1].camera {
            return Err(CliError::Config(
                "all scenes in one spec file must share the camera".into(),
            ));
        }
    }
    let mut generated = Vec::with_capacity(specs.len());
    for spec in &specs {
        generated.push(generate_scene(spec)?);
    }
    let scene = merge_scenes(generated);
    write_scene(&scene, &args.out)?;
    println!(
        "wrote {} image(s), {} detection(s), {} truth record(s), {} log line(s) to {}",
        scene.images.len(),
        scene.detections.len(),
        scene.truths.len(),
        scene.ais_log.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_render(args: &RenderArgs) -> Result<(), CliError> {
    let annotations: Vec<AnnotationRecord> = read_jsonl(&args.annotations)?;
    let mut by_image: BTreeMap<String, Vec<&AnnotationRecord>> = BTreeMap::new();
    for a in &annotations {
        by_image.entry(a.image_id.clone()).or_default().push(a);
    }
    if let Some(images_path) = &args.images {
        let images: Vec<ImageRecord> = read_jsonl(images_path)?;
        for img in images {
            by_image.entry(img.image_id).or_default();
        }
    }
    ensure_dir(&args.out)?;
    for (image_id, boxes) in &by_image {
        let svg = svg::render(boxes, args.width, args.height);
        let name: String = image_id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let path = args.out.join(format!("{name}.svg"));
        std::fs::write(&path, svg)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    println!(
        "rendered {} overlay(s) to {}",
        by_image.len(),
        args.out.display()
    );
    Ok(())
}

/// Deterministic SVG overlays: per box, twelve `class="edge"` segments
/// (bottom quad closed c1->c2->c3->c4, top quad, four verticals) and
/// three `class="axis"` rays from the pixel centroid toward the bow,
/// port, and top face centers.
pub mod svg {
    use vesselpose::io::AnnotationRecord;

    const BOTTOM: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 0)];
    const TOP: [(usize, usize); 4] = [(4, 5), (5, 6), (6, 7), (7, 4)];
    const VERTICAL: [(usize, usize); 4] = [(0, 4), (1, 5), (2, 6), (3, 7)];
    /// Face corner indices whose pixel means anchor the axis rays.
    const BOW_FACE: [usize; 4] = [0, 1, 4, 5];
    const PORT_FACE: [usize; 4] = [0, 3, 4, 7];
    const TOP_FACE: [usize; 4] = [4, 5, 6, 7];

    fn mean(px: &[[f64; 2]; 8], idx: &[usize]) -> (f64, f64) {
        let n = idx.len() as f64;
        let (sx, sy) = idx
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &i| (sx + px[i][0], sy + px[i][1]));
        (sx / n, sy / n)
    }

    pub fn render(boxes: &[&AnnotationRecord], width: u32, height: u32) -> String {
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
             viewBox=\"0 0 {width} {height}\">\n\
             <style>.edge{{stroke:#1f6feb;stroke-width:2;fill:none}}\
             .axis{{stroke:#d29922;stroke-width:2;fill:none}}</style>\n"
        );
        for b in boxes {
            let px = &b.corners_px;
            out.push_str(&format!("<g data-mmsi=\"{}\">\n", b.mmsi));
            for (a, z) in BOTTOM.iter().chain(&TOP).chain(&VERTICAL) {
                out.push_str(&format!(
                    "<path class=\"edge\" d=\"M {:.2},{:.2} L {:.2},{:.2}\"/>\n",
                    px[*a][0], px[*a][1], px[*z][0], px[*z][1]
                ));
            }
            let (cx, cy) = mean(px, &[0, 1, 2, 3, 4, 5, 6, 7]);
            for (name, face) in [
                ("forward", &BOW_FACE),
                ("port", &PORT_FACE),
                ("up", &TOP_FACE),
            ] {
                let (ax, ay) = mean(px, face);
                out.push_str(&format!(
                    "<path class=\"axis\" data-axis=\"{name}\" \
                     d=\"M {cx:.2},{cy:.2} L {ax:.2},{ay:.2}\"/>\n"
                ));
            }
            out.push_str("</g>\n");
        }
        out.push_str("</svg>\n");
        out
    }

}
