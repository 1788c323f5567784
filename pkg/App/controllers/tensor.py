#DeskEBM
#Energy-based model training toolkit

#TENSOR CONTROLLERS - Differentiable operations on tensors and reverse-mode differentiation through the recorded graph.

import numpy as np

from App.errors import ShapeError, ConfigError, LabelRangeError
from App.models.tensor import Tensor, currentGraph


#Wraps arrays and numbers as constant tensors; tensors pass through untouched.
def asTensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


#Builds the output tensor, and records the operation when any input needs a gradient.
def _result(name, values, inputs, backwardRule):
    output = Tensor(values)
    if any(t.requiresGrad for t in inputs):
        currentGraph().record(name, inputs, output, backwardRule)
    return output


#Sums a broadcast gradient back down to the shape of the operand it came from.
def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


################## LAYER OPERATIONS ##################

#Computes x @ W + b for a batch of row vectors.
def affine(x, W, b):
    x, W, b = asTensor(x), asTensor(W), asTensor(b)
    if len(x.shape) != 2 or len(W.shape) != 2 or len(b.shape) != 1 or x.shape[1] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise ShapeError("affine shape mismatch: x %s, W %s, b %s" % (x.shape, W.shape, b.shape))

    xv, Wv = x.values, W.values

    def backwardRule(upstream):
        return upstream @ Wv.T, xv.T @ upstream, upstream.sum(axis=0)

    return _result("affine", xv @ Wv + b.values, (x, W, b), backwardRule)


#Elementwise max(x, slope * x). The kink at zero takes the positive branch.
def leakyRelu(x, slope):
    if not 0.0 <= slope < 1.0:
        raise ConfigError("leakyRelu slope must lie in [0, 1), got %r" % slope)
    x = asTensor(x)
    local = np.where(x.values >= 0.0, 1.0, slope)

    def backwardRule(upstream):
        return (upstream * local,)

    return _result("leakyRelu", x.values * local, (x,), backwardRule)


#Row-wise log-sum-exp over a [B, C] tensor, with the row max subtracted for overflow safety.
def logSumExp(logits):
    logits = asTensor(logits)
    if len(logits.shape) != 2 or logits.shape[1] < 1:
        raise ShapeError("logSumExp expects [B, C] logits with C >= 1, got %s" % logits.shape)
    values = logits.values
    rowMax = values.max(axis=1, keepdims=True)
    shifted = np.exp(values - rowMax)
    total = shifted.sum(axis=1, keepdims=True)
    out = (rowMax + np.log(total))[:, 0]
    probabilities = shifted / total

    def backwardRule(upstream):
        return (upstream[:, None] * probabilities,)

    return _result("logSumExp", out, (logits,), backwardRule)


#Row-wise softmax. Not differentiable; used for reporting class probabilities.
def softmax(logits):
    values = asTensor(logits).values
    shifted = np.exp(values - values.max(axis=1, keepdims=True))
    return Tensor(shifted / shifted.sum(axis=1, keepdims=True))


#Mean over the batch of logSumExp(logits[i]) - logits[i, labels[i]].
def softmaxCrossEntropy(logits, labels):
    logits = asTensor(logits)
    labels = np.asarray(labels)
    if len(logits.shape) != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("softmaxCrossEntropy shape mismatch: logits %s, labels %s" % (logits.shape, list(labels.shape)))
    numClasses = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= numClasses):
        raise LabelRangeError("labels must lie in [0, %d)" % numClasses)
    labels = labels.astype(np.int64)

    values = logits.values
    batch = values.shape[0]
    rowMax = values.max(axis=1, keepdims=True)
    shifted = np.exp(values - rowMax)
    total = shifted.sum(axis=1, keepdims=True)
    lse = (rowMax + np.log(total))[:, 0]
    rows = np.arange(batch)
    out = np.mean(lse - values[rows, labels])

    def backwardRule(upstream):
        grad = shifted / total
        grad[rows, labels] -= 1.0
        return (grad * (upstream / batch),)

    return _result("softmaxCrossEntropy", out, (logits,), backwardRule)


################## ELEMENTWISE AND REDUCTION OPERATIONS ##################

def add(a, b):
    a, b = asTensor(a), asTensor(b)
    shapeA, shapeB = a.values.shape, b.values.shape

    def backwardRule(upstream):
        return _unbroadcast(upstream, shapeA), _unbroadcast(upstream, shapeB)

    return _result("add", a.values + b.values, (a, b), backwardRule)


def sub(a, b):
    a, b = asTensor(a), asTensor(b)
    shapeA, shapeB = a.values.shape, b.values.shape

    def backwardRule(upstream):
        return _unbroadcast(upstream, shapeA), _unbroadcast(-upstream, shapeB)

    return _result("sub", a.values - b.values, (a, b), backwardRule)


def mul(a, b):
    a, b = asTensor(a), asTensor(b)
    av, bv = a.values, b.values

    def backwardRule(upstream):
        return _unbroadcast(upstream * bv, av.shape), _unbroadcast(upstream * av, bv.shape)

    return _result("mul", av * bv, (a, b), backwardRule)


def neg(x):
    return scale(x, -1.0)


#Multiplies by a constant.
def scale(x, factor):
    x = asTensor(x)
    factor = float(factor)

    def backwardRule(upstream):
        return (upstream * factor,)

    return _result("scale", x.values * factor, (x,), backwardRule)


def square(x):
    x = asTensor(x)
    xv = x.values

    def backwardRule(upstream):
        return (2.0 * xv * upstream,)

    return _result("square", xv * xv, (x,), backwardRule)


def sumAll(x):
    x = asTensor(x)
    shape = x.values.shape

    def backwardRule(upstream):
        return (np.broadcast_to(upstream, shape).copy(),)

    return _result("sumAll", np.sum(x.values), (x,), backwardRule)


def mean(x):
    x = asTensor(x)
    return scale(sumAll(x), 1.0 / max(x.size, 1))


#Sums each row of a [B, D] tensor to give [B].
def rowSum(x):
    x = asTensor(x)
    if len(x.shape) != 2:
        raise ShapeError("rowSum expects a [B, D] tensor, got %s" % x.shape)
    width = x.shape[1]

    def backwardRule(upstream):
        return (np.repeat(upstream[:, None], width, axis=1),)

    return _result("rowSum", x.values.sum(axis=1), (x,), backwardRule)


def reshape(x, shape):
    x = asTensor(x)
    original = x.values.shape
    try:
        values = x.values.reshape(shape)
    except ValueError:
        raise ShapeError("cannot reshape %s to %s" % (list(original), list(shape)))

    def backwardRule(upstream):
        return (upstream.reshape(original),)

    return _result("reshape", values, (x,), backwardRule)


################## DIFFERENTIATION ##################

#Propagates d(root)/d(node) through every operation reachable from the root, in reverse record order, visiting each once.
#Returns the adjoints keyed by tensor id, along with the tensors they belong to.
def _propagate(root):
    if root.size != 1:
        raise ShapeError("backward needs a scalar root, got shape %s" % root.shape)

    adjoints = {id(root): np.ones_like(root.values)}
    tensors = {id(root): root}
    if root.operation is None:
        return adjoints, tensors

    reachable = {}
    pending = [root.operation]
    while pending:
        operation = pending.pop()
        if operation.index in reachable:
            continue
        reachable[operation.index] = operation
        for tensor in operation.inputs:
            if tensor.operation is not None:
                pending.append(tensor.operation)

    for operation in sorted(reachable.values(), key=lambda op: op.index, reverse=True):
        upstream = adjoints.get(id(operation.output))
        if upstream is None:
            continue
        localGrads = operation.backwardRule(upstream)
        for tensor, grad in zip(operation.inputs, localGrads):
            if grad is None or not tensor.requiresGrad:
                continue
            key = id(tensor)
            tensors[key] = tensor
            adjoints[key] = adjoints[key] + grad if key in adjoints else grad
    return adjoints, tensors


#Writes d(root)/d(tensor) into the grad field of every tensor that requires a gradient and that the root depends on.
#Gradients add onto whatever is already stored.
def backward(root):
    adjoints, tensors = _propagate(root)
    for key, grad in adjoints.items():
        tensor = tensors[key]
        if tensor.requiresGrad:
            tensor.accumulateGrad(grad)


#Returns d(root)/d(tensor) for each requested tensor without touching any grad field.
def gradient(root, wrt):
    adjoints, _ = _propagate(root)
    return [adjoints[id(t)].reshape(t.values.shape).copy() if id(t) in adjoints else np.zeros_like(t.values) for t in wrt]
