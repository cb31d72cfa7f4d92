pub mod mtl_oracle;
