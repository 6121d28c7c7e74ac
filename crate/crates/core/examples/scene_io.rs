//! Generate a scene, store it in the binary scene format and read it back.
//!
//! cargo run --release --example scene_io

use arna::synth::{generate_scene, read_scene, write_scene, RenderMode, SceneConfig};

fn main() {
    let cfg = SceneConfig {
        frames: 10,
        observation: arna::ObservationParams::default().with_size(64, 64),
        ..SceneConfig::default()
    };
    let dir = std::env::temp_dir().join("arna-scene-example");
    std::fs::create_dir_all(&dir).unwrap();

    for (name, render) in [("poisson", RenderMode::Poisson), ("noise-free", RenderMode::NoiseFree)] {
        let scene = generate_scene(&SceneConfig { render, ..cfg }, 5).unwrap();
        let path = dir.join(format!("{name}.bin"));
        write_scene(&scene, &path).unwrap();
        let back = read_scene(&path).unwrap();
        let size = std::fs::metadata(&path).unwrap().len();
        let t = back.truth(0);
        println!(
            "{name:>10}: {} ({size} bytes), round trip exact: {}, start ({:.2}, {:.2}) v ({:.2}, {:.2}) i0 {:.3}, frame-0 mean {:.3}",
            path.display(),
            back == scene,
            t.x,
            t.y,
            t.vx,
            t.vy,
            t.i0,
            back.frames[0].mean()
        );
    }
}
