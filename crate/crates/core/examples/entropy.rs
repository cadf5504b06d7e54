//! Entropy of a Gaussian from samples and its exact score, with both estimators.

use rand::Rng;
use rand_distr::StandardNormal;
use scoreflow::likelihood::{entropy_estimate, EntropyForm, EntropyOptions};
use scoreflow::oracles::gaussian_entropy;
use scoreflow::rng::{domain, stream};
use scoreflow::score::AnalyticGaussian;
use scoreflow::sde::SdeSpec;

fn main() -> scoreflow::Result<()> {
    let var = [4.0, 0.5, 2.0];
    let model = AnalyticGaussian::new(vec![0.0; 3], var.to_vec())?;
    let mut r = stream(0, domain::TEST_DATA, 0);
    let samples: Vec<Vec<f64>> = (0..5000)
        .map(|_| var.iter().map(|v| v.sqrt() * r.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    println!("closed form   {:.4}", gaussian_entropy(&var));
    for spec in [SdeSpec::vp(0.1, 20.0), SdeSpec::ve(0.01, 50.0)] {
        for form in [EntropyForm::DriftDotScore, EntropyForm::DivergenceForm] {
            let est = entropy_estimate(&model, &spec, &samples, form, &EntropyOptions::default())?;
            println!("{:<6} {form:?}  {:.4} +- {:.4}", format!("{:?}", spec.kind()), est.value_nats, est.std_error);
        }
    }
    Ok(())
}
