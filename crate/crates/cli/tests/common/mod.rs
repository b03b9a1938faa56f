#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use image::{ImageBuffer as PixelBuffer, Luma};
use regloss_cli::io::write_raster;
use regloss_core::bench::{generate_texture, BlobParams, Texture};
use regloss_core::image::{crop, gaussian_blur};
use regloss_core::metrics::InstanceMask;
use regloss_core::ImageBuffer;

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn regloss(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_regloss"));
    cmd.args(args).env_remove("REGLOSS_THREADS").env_remove("RUST_LOG");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn regloss");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn ok(args: &[&str]) -> Output {
    let out = regloss(args, &[]);
    assert_eq!(out.code, 0, "regloss {args:?} failed: {}", out.stderr);
    out
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn input(name: &str) -> String {
    fixtures().join("input").join(name).display().to_string()
}

/// Set `REGLOSS_BLESS=1` to regenerate fixture inputs and recorded outputs.
pub fn blessing() -> bool {
    std::env::var_os("REGLOSS_BLESS").is_some()
}

pub fn golden(name: &str, actual: &[u8]) {
    let path = fixtures().join("expected").join(name);
    if blessing() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    if expected != actual {
        panic!(
            "{name} differs from the recorded output\n--- expected\n{}\n--- actual\n{}",
            String::from_utf8_lossy(&expected),
            String::from_utf8_lossy(actual)
        );
    }
}

pub const PLANTED_SHIFT: (usize, usize) = (11, 7);

fn eight_bit(img: &ImageBuffer) -> ImageBuffer {
    img.map(|v| v.round().clamp(0.0, 255.0))
}

fn write_labels(path: &Path, m: &InstanceMask) {
    let (h, w) = m.shape();
    let raw: Vec<u16> = m.labels().iter().map(|&l| l as u16).collect();
    let buf: PixelBuffer<Luma<u16>, _> = PixelBuffer::from_raw(w as u32, h as u32, raw).unwrap();
    buf.save(path).unwrap();
}

fn rect_labels(h: usize, w: usize, rects: &[(usize, usize, usize, usize)]) -> InstanceMask {
    let mut m = InstanceMask::background(h, w);
    for (k, &(t, l, rh, rw)) in rects.iter().enumerate() {
        m.fill_rect(t, l, rh, rw, k as u32 + 1);
    }
    m
}

/// Writes every fixture input (bless mode only).
pub fn write_inputs() {
    let dir = fixtures().join("input");
    std::fs::create_dir_all(&dir).unwrap();
    let p = |n: &str| dir.join(n);

    let fixed = generate_texture(64, 64, &Texture::default(), 11).unwrap();
    write_raster(&p("fixed.fras"), &fixed, 1.0).unwrap();
    let moving = crop(&fixed, PLANTED_SHIFT.0, PLANTED_SHIFT.1, 32, 32).unwrap();
    write_raster(&p("moving.fras"), &moving, 1.0).unwrap();

    let pred = crop(&fixed, 4, 6, 24, 24).unwrap().map(|v| 0.9 * v + 3.0);
    write_raster(&p("pred.fras"), &pred, 1.0).unwrap();
    std::fs::write(p("transform.json"), "{\"du\": -4, \"dv\": -6, \"theta\": 0.0}\n").unwrap();
    let g_x = generate_texture(16, 16, &Texture::default(), 5).unwrap();
    let g_omega_x = regloss_core::loss::rotate180(&g_x).map(|v| v + 1.0);
    write_raster(&p("g_x.fras"), &g_x, 1.0).unwrap();
    write_raster(&p("g_omega_x.fras"), &g_omega_x, 1.0).unwrap();

    let stain_params = BlobParams {
        background: 200.0,
        blob_level: 60.0,
        smoothing: 1.0,
        ..BlobParams::default()
    };
    let stain = eight_bit(&generate_texture(96, 96, &Texture::CellBlobs(stain_params), 3).unwrap());
    write_raster(&p("stain.png"), &stain, 1.0).unwrap();
    let blurred = eight_bit(&gaussian_blur(&stain, 1.5, 7).unwrap());
    write_raster(&p("stain_blur.png"), &blurred, 1.0).unwrap();

    let target = rect_labels(
        48,
        48,
        &[(2, 2, 8, 8), (2, 20, 6, 10), (20, 4, 12, 12), (30, 30, 10, 14), (40, 2, 5, 5)],
    );
    let pred = rect_labels(
        48,
        48,
        &[(3, 2, 8, 8), (2, 22, 6, 10), (21, 6, 11, 11), (12, 36, 6, 6), (40, 3, 5, 5)],
    );
    write_labels(&p("labels_target.png"), &target);
    write_labels(&p("labels_pred.png"), &pred);

    let maps_planes = [
        ImageBuffer::from_fn(8, 8, |r, c| 0.2 + 0.1 * r as f64 + 0.001 * c as f64),
        ImageBuffer::from_fn(8, 8, |r, c| ((r * 8 + c) as f64 / 63.0).min(0.95)),
        ImageBuffer::from_fn(8, 8, |r, c| ((r + 3 * c) % 16) as f64 * std::f64::consts::PI / 16.0),
    ];
    let maps = ImageBuffer::from_planes(&maps_planes).unwrap();
    write_raster(&p("maps.fras"), &maps, 1.0).unwrap();
}
