//! CSV panel workflow: write a multi-environment training file, load it by
//! schema, fit, save the model artifact, and score a test file per
//! environment.

use imp_lab::artifact::ModelArtifact;
use imp_lab::data::{load_panel_csv, load_test_csv, toy_panel, write_panel_csv, Schema};
use imp_lab::discrete::{fit_discrete, SearchLimits, SelectionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("imp_lab_panel_example");
    std::fs::create_dir_all(&dir)?;
    let mut train = toy_panel(&[0.5, 1.0, 1.5, 2.0, 2.5], 300, 1);
    for (env, city) in train.envs.iter_mut().zip(["north", "south", "east", "west", "centre"]) {
        env.label = city.into();
    }
    let mut test = toy_panel(&[-3.0, 6.0], 300, 2);
    test.envs[0].label = "harbour".into();
    test.envs[1].label = "hills".into();
    write_panel_csv(dir.join("train.csv"), &train, "city", "cases")?;
    write_panel_csv(dir.join("test.csv"), &test, "city", "cases")?;

    let schema = Schema { env_col: Some("city".into()), u_col: None, y_col: "cases".into(), feature_cols: train.feature_names.clone() };
    let (data, load) = load_panel_csv(dir.join("train.csv"), &schema)?;
    println!("read {} rows, dropped {}", load.rows_read, load.rows_dropped);
    let imp_lab::data::PanelDataset::Discrete(panel) = data else { unreachable!() };

    let report = fit_discrete(&panel, SearchLimits::NONE, &SelectionConfig::default())?;
    let artifact = ModelArtifact::Discrete { schema: schema.clone(), model: report.model()?.clone() };
    artifact.save(dir.join("model.json"))?;

    let loaded = ModelArtifact::load(dir.join("model.json"))?;
    let (test_data, _) = load_test_csv(dir.join("test.csv"), loaded.schema())?;
    for g in loaded.predict(&test_data)? {
        println!("{:<8} mean RSS {:.3}", g.label, g.mean_rss().unwrap_or(f64::NAN));
    }
    println!("files in {}", dir.display());
    Ok(())
}
