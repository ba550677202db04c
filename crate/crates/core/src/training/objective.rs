//! One GAN step's forward passes and gradients, generic over the element
//! type so the exact training computation can be checked in f64.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::losses::{
    adversarial_loss_grad, cycle_loss_grad, label_loss_grad, self_regularization_loss_grad, AdversarialForm,
    LossReport, LossWeights, Mode,
};
use crate::models::{Classifier, Discriminator, Generator};
use crate::nn::{Grads, Trace};
use crate::tensor::{Element, Tensor};

/// The trainable networks. SimGAN uses only `g_s2r` and `d_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct GanNets<T> {
    pub g_s2r: Generator<T>,
    pub g_r2s: Option<Generator<T>>,
    pub d_r: Discriminator<T>,
    pub d_s: Option<Discriminator<T>>,
}

impl<T: Element> GanNets<T> {
    pub fn cast<U: Element>(&self) -> GanNets<U> {
        GanNets {
            g_s2r: self.g_s2r.cast(),
            g_r2s: self.g_r2s.as_ref().map(Generator::cast),
            d_r: self.d_r.cast(),
            d_s: self.d_s.as_ref().map(Discriminator::cast),
        }
    }
}

/// The frozen pretrained classifiers of label mode.
#[derive(Clone, Copy, Debug)]
pub struct Frozen<'a, T> {
    pub f_r: &'a Classifier<T>,
    pub f_s: &'a Classifier<T>,
}

#[derive(Clone, Debug)]
pub struct GanBatch<T> {
    pub x_r: Tensor<T>,
    pub y_r: Vec<usize>,
    pub x_s: Tensor<T>,
    pub y_s: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ObjectiveSettings {
    pub mode: Mode,
    pub weights: LossWeights,
    pub adversarial: AdversarialForm,
    pub exclude: BTreeSet<usize>,
}

/// Translations of one batch with the traces needed for backpropagation.
pub struct GeneratorPass<T> {
    /// `G_s2r(x_s)`.
    pub fake_r: Tensor<T>,
    trace_fake_r: Trace<T>,
    /// `G_r2s(x_r)`, `G_r2s(G_s2r(x_s))` and `G_s2r(G_r2s(x_r))` in cycle modes.
    pub cycle: Option<CyclePass<T>>,
}

pub struct CyclePass<T> {
    pub fake_s: Tensor<T>,
    trace_fake_s: Trace<T>,
    pub rec_s: Tensor<T>,
    trace_rec_s: Trace<T>,
    pub rec_r: Tensor<T>,
    trace_rec_r: Trace<T>,
}

pub fn generator_forward_pass<T: Element>(
    nets: &GanNets<T>,
    batch: &GanBatch<T>,
    mode: Mode,
) -> Result<GeneratorPass<T>> {
    let (fake_r, trace_fake_r) = nets.g_s2r.forward_traced(&batch.x_s, Some(&batch.y_s))?;
    let cycle = if mode.has_cycle() {
        let g_r2s = nets
            .g_r2s
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{mode} needs the r2s generator")))?;
        let (rec_s, trace_rec_s) = g_r2s.forward_traced(&fake_r, Some(&batch.y_s))?;
        let (fake_s, trace_fake_s) = g_r2s.forward_traced(&batch.x_r, Some(&batch.y_r))?;
        let (rec_r, trace_rec_r) = nets.g_s2r.forward_traced(&fake_s, Some(&batch.y_r))?;
        Some(CyclePass {
            fake_s,
            trace_fake_s,
            rec_s,
            trace_rec_s,
            rec_r,
            trace_rec_r,
        })
    } else {
        None
    };
    Ok(GeneratorPass {
        fake_r,
        trace_fake_r,
        cycle,
    })
}

/// `½·(adv(D(real), real) + adv(D(fake), fake))` and its parameter gradient.
pub fn discriminator_loss<T: Element>(
    d: &Discriminator<T>,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    form: AdversarialForm,
) -> Result<(f64, Grads<T>)> {
    let mut grads = Grads::zeros_like(d.params());
    let half = T::lit(0.5);
    let mut total = 0.0;
    for (images, target) in [(real, true), (fake, false)] {
        let (scores, trace) = d.forward_traced(images)?;
        let (loss, mut g) = adversarial_loss_grad(&scores, target, form)?;
        total += 0.5 * loss.as_f64();
        g.scale(half);
        d.backward(&trace, g, Some(&mut grads), false)?;
    }
    Ok((total, grads))
}

/// Adversarial score of `fake` against `target real` through a fixed
/// discriminator: `(loss, d loss / d fake)`.
fn fool<T: Element>(
    d: &Discriminator<T>,
    fake: &Tensor<T>,
    form: AdversarialForm,
    coeff: f64,
) -> Result<(f64, Tensor<T>)> {
    let (scores, trace) = d.forward_traced(fake)?;
    let (loss, mut g) = adversarial_loss_grad(&scores, true, form)?;
    g.scale(T::lit(coeff));
    Ok((loss.as_f64(), d.backward(&trace, g, None, true)?))
}

/// Generator-side objective under `settings.mode` and its gradients for
/// `g_s2r` and (cycle modes) `g_r2s`. Discriminators and classifiers are
/// read only.
pub fn generator_objective<T: Element>(
    nets: &GanNets<T>,
    frozen: Option<Frozen<'_, T>>,
    batch: &GanBatch<T>,
    pass: &GeneratorPass<T>,
    settings: &ObjectiveSettings,
) -> Result<(LossReport, Grads<T>, Option<Grads<T>>)> {
    let mode = settings.mode;
    let form = settings.adversarial;
    let c = mode.coefficients(&settings.weights);
    let lit = |v: f64| T::lit(v);
    let mut report = LossReport::default();
    let mut grads_s2r = Grads::zeros_like(nets.g_s2r.params());

    let (adv_r, mut g_fake_r) = fool(&nets.d_r, &pass.fake_r, form, c[0])?;
    report.adv_r = adv_r;

    let grads_r2s = match (&pass.cycle, mode) {
        (None, Mode::Simgan) => {
            let (reg, g) = self_regularization_loss_grad(&batch.x_s, &pass.fake_r)?;
            report.selfreg = reg.as_f64();
            g_fake_r.add_scaled(&g, lit(c[5]));
            None
        }
        (Some(cy), Mode::Cyclegan | Mode::LabelCyclegan) => {
            let g_r2s = nets.g_r2s.as_ref().expect("cycle pass implies r2s generator");
            let d_s = nets
                .d_s
                .as_ref()
                .ok_or_else(|| Error::Config(format!("{mode} needs the sim-side discriminator")))?;
            let (adv_s, mut g_fake_s) = fool(d_s, &cy.fake_s, form, c[1])?;
            report.adv_s = adv_s;

            let (cyc_s, mut g_rec_s) = cycle_loss_grad(&batch.x_s, &cy.rec_s)?;
            let (cyc_r, mut g_rec_r) = cycle_loss_grad(&batch.x_r, &cy.rec_r)?;
            report.cycle = cyc_s.as_f64() + cyc_r.as_f64();
            g_rec_s.scale(lit(c[2]));
            g_rec_r.scale(lit(c[2]));

            if mode == Mode::LabelCyclegan {
                let frozen =
                    frozen.ok_or_else(|| Error::Config("label_cyclegan needs both pretrained classifiers".into()))?;
                let lab_r = label_loss_grad(
                    frozen.f_r,
                    &pass.fake_r,
                    &batch.y_s,
                    &cy.rec_r,
                    &batch.y_r,
                    &settings.exclude,
                )?;
                let lab_s = label_loss_grad(
                    frozen.f_s,
                    &cy.fake_s,
                    &batch.y_r,
                    &cy.rec_s,
                    &batch.y_s,
                    &settings.exclude,
                )?;
                report.lab_r = lab_r.value.as_f64();
                report.lab_s = lab_s.value.as_f64();
                report.masked_fraction = lab_r.masked_fraction;
                g_fake_r.add_scaled(&lab_r.grad_transformed, lit(c[3]));
                g_rec_r.add_scaled(&lab_r.grad_cycle, lit(c[3]));
                g_fake_s.add_scaled(&lab_s.grad_transformed, lit(c[4]));
                g_rec_s.add_scaled(&lab_s.grad_cycle, lit(c[4]));
            }

            // reconstruction paths first: they feed gradient into the fakes
            let mut grads_r2s = Grads::zeros_like(g_r2s.params());
            let via_rec_s = g_r2s.backward(&cy.trace_rec_s, g_rec_s, Some(&mut grads_r2s), true)?;
            g_fake_r.add_assign(&via_rec_s);
            let via_rec_r = nets
                .g_s2r
                .backward(&cy.trace_rec_r, g_rec_r, Some(&mut grads_s2r), true)?;
            g_fake_s.add_assign(&via_rec_r);
            g_r2s.backward(&cy.trace_fake_s, g_fake_s, Some(&mut grads_r2s), false)?;
            Some(grads_r2s)
        }
        _ => return Err(Error::Config(format!("generator pass does not match mode {mode}"))),
    };
    nets.g_s2r
        .backward(&pass.trace_fake_r, g_fake_r, Some(&mut grads_s2r), false)?;
    Ok((report.finish(&settings.weights, mode)?, grads_s2r, grads_r2s))
}
