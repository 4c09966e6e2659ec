//! JSON key files. The private file holds `Kp` and `Ks`; the public file
//! only `Kp`.

use serde::{Deserialize, Serialize};
use socbir_core::hexint;
use socbir_core::{Keypair, PublicKey, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrivateDoc {
    modulus: String,
    lambda: String,
}

pub fn private_to_json(keys: &Keypair) -> String {
    serde_json::to_string_pretty(&PrivateDoc {
        modulus: hexint::encode(keys.public.modulus()),
        lambda: hexint::encode(keys.private.lambda()),
    })
    .expect("key serializes")
}

pub fn private_from_json(text: &str) -> Result<Keypair> {
    let doc: PrivateDoc =
        serde_json::from_str(text).map_err(|e| socbir_core::Error::Format(format!("key file: {e}")))?;
    Keypair::from_parts(hexint::decode(&doc.modulus)?, hexint::decode(&doc.lambda)?)
}

pub fn public_to_json(pk: &PublicKey) -> String {
    serde_json::to_string_pretty(pk).expect("key serializes")
}
