//! Queries live embedding and LM services when `UCSM_EMBED_URL` and
//! `UCSM_LM_URL` are set, otherwise shows the fallback path.
//! Usage: `UCSM_EMBED_URL=http://host:port cargo run --example provider`

use std::time::Duration;

use occlusion_bench::provider::{EmbeddingClient, LanguageModelClient, ProviderEndpoint, EMBED_URL_ENV, LM_URL_ENV};
use occlusion_bench::ucsm::{ucsm, ContextCalibration, ContextProvider, Providers, SemanticProvider, UcsmWeights};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let endpoint = |var| -> Result<Option<ProviderEndpoint>, Box<dyn std::error::Error>> {
        Ok(match ProviderEndpoint::from_env(var) {
            Some(e) => Some(e.with_timeout(Duration::from_secs(2))?.with_retries(1)),
            None => None,
        })
    };
    let embed = endpoint(EMBED_URL_ENV)?.map(EmbeddingClient::new);
    let lm = endpoint(LM_URL_ENV)?.map(LanguageModelClient::new);
    if embed.is_none() && lm.is_none() {
        println!("{EMBED_URL_ENV} and {LM_URL_ENV} are unset; components fall back to 0.5");
    }
    if let Some(c) = &embed {
        match c.fetch_cosine("approved", "accepted") {
            Ok(v) => println!("cosine(approved, accepted) = {v:.4}"),
            Err(e) => println!("embedding service: {e}"),
        }
    }
    if let Some(c) = &lm {
        match c.fetch_logprob("the motion was", "approved", "by the board") {
            Ok(v) => println!("log P(approved | context) = {v:.4}"),
            Err(e) => println!("LM service: {e}"),
        }
    }
    let providers = Providers {
        semantic: embed.as_ref().map(|c| c as &dyn SemanticProvider),
        context: lm.as_ref().map(|c| c as &dyn ContextProvider),
    };
    let r = ucsm("accepted", "approved", "the motion was", "by the board", &providers, &UcsmWeights::default(), &ContextCalibration::default())?;
    println!("UCSM {:.4} (semantic {:?}, context {:?})", r.ucsm, r.provenance.semantic, r.provenance.context);
    Ok(())
}
