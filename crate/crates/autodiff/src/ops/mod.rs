pub(crate) mod conv;
pub(crate) mod elementwise;
pub(crate) mod linear;
pub(crate) mod loss;
pub(crate) mod norm;
pub(crate) mod pool;
pub(crate) mod recurrent;

pub use conv::Padding;
pub use loss::softmax;
pub use norm::{BatchNormMode, BatchStats};

use crate::tape::{Accumulator, Op, Tape};
use crate::Real;

pub(crate) fn backward<T: Real>(tape: &Tape<T>, op: &Op<T>, node: usize, g: &[T], acc: &mut Accumulator<'_, T>) {
    match op {
        Op::Leaf => {}
        Op::Conv2d { x, w, b, geom } => conv::backward(tape, *x, *w, *b, geom, g, acc),
        Op::MaxPool { x, argmax } | Op::GlobalMaxPool { x, argmax } => pool::backward_argmax(*x, argmax, g, acc),
        Op::BatchNorm { x, gamma, beta, xhat, inv_std, training } => {
            norm::backward(tape, *x, *gamma, *beta, xhat, inv_std, *training, g, acc)
        }
        Op::Relu { x } => elementwise::relu_backward(tape, *x, node, g, acc),
        Op::Dropout { x, mask } => elementwise::dropout_backward(*x, mask, g, acc),
        Op::Linear { x, w, b } => linear::backward(tape, *x, *w, *b, g, acc),
        Op::Embedding { table, ids } => linear::embedding_backward(tape, *table, ids, g, acc),
        Op::ConcatChannels { a, b } => elementwise::concat_backward(tape, *a, *b, g, acc),
        Op::Add { a, b } => elementwise::add_backward(*a, *b, g, acc),
        Op::Mul { a, b } => elementwise::mul_backward(tape, *a, *b, g, acc),
        Op::Sum { x } => elementwise::sum_backward(*x, g, acc),
        Op::Film { x, gamma, beta } => elementwise::film_backward(tape, *x, *gamma, *beta, g, acc),
        Op::Narrow { x, start, len } => elementwise::narrow_backward(tape, *x, *start, *len, g, acc),
        Op::MeanOverFreq { x } => pool::mean_over_freq_backward(tape, *x, g, acc),
        Op::Gru { x, w_ih, w_hh, b_ih, b_hh, cache } => {
            recurrent::backward(tape, [*x, *w_ih, *w_hh, *b_ih, *b_hh], cache, g, acc)
        }
        Op::SoftmaxCrossEntropy { logits, probs, targets } => loss::backward(*logits, probs, targets, g, acc),
    }
}
