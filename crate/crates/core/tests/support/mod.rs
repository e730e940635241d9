pub mod alpha_oracle;
pub mod hac_oracle;
pub mod kn_oracle;
