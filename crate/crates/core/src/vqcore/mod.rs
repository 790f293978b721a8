//! VQ-GAN over volumes.
