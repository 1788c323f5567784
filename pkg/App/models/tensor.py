#DeskEBM
#Energy-based model training toolkit

#TENSOR MODEL - Dense double precision arrays with an optional gradient, and the per-thread graph that records operations on them.

import itertools
import threading

import numpy as np


#A dense n-dimensional array of doubles. Tensors produced by a recorded operation remember that operation.
class Tensor:
    def __init__(self, values, requiresGrad=False):
        self.values = np.array(values, dtype=np.float64)
        self.requiresGrad = bool(requiresGrad)
        self.grad = None
        self.operation = None

    @property
    def shape(self):
        return list(self.values.shape)

    @property
    def size(self):
        return int(self.values.size)

    @property
    def isLeaf(self):
        return self.operation is None

    #Returns the value of a single element tensor as a float.
    def item(self):
        return float(self.values.reshape(-1)[0])

    #Returns a copy of the tensor that is cut off from any graph.
    def detach(self):
        return Tensor(self.values.copy())

    def zeroGrad(self):
        self.grad = None

    #Adds a gradient contribution, allocating the grad array on first use.
    def accumulateGrad(self, grad):
        grad = np.asarray(grad, dtype=np.float64).reshape(self.values.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    def __repr__(self):
        return "Tensor(shape=%s, requiresGrad=%s)" % (self.shape, self.requiresGrad)


#One recorded operation: the inputs it read, the output it produced, and the rule that maps the output's gradient to input gradients.
class Operation:
    __slots__ = ("name", "inputs", "output", "backwardRule", "index")

    def __init__(self, name, inputs, output, backwardRule, index):
        self.name = name
        self.inputs = tuple(inputs)
        self.output = output
        self.backwardRule = backwardRule
        self.index = index

    def __repr__(self):
        return "Operation(%s, #%d)" % (self.name, self.index)


#Ordered record of the operations applied since the last reset. Indices only ever increase, so an operation's inputs always precede it.
class ComputeGraph:
    #Shared across graphs so that indices stay ordered even when tensors outlive a reset.
    _counter = itertools.count()
    _counterLock = threading.Lock()

    def __init__(self):
        self.operations = []

    def record(self, name, inputs, output, backwardRule):
        with ComputeGraph._counterLock:
            index = next(ComputeGraph._counter)
        operation = Operation(name, inputs, output, backwardRule, index)
        self.operations.append(operation)
        output.operation = operation
        output.requiresGrad = True
        return operation

    #Drops the record. Tensors that were already built keep their links, so a later backward through them still works.
    def reset(self):
        self.operations = []

    def __len__(self):
        return len(self.operations)


_local = threading.local()


#Returns the graph of the calling thread, creating it on first use.
def currentGraph():
    graph = getattr(_local, "graph", None)
    if graph is None:
        graph = ComputeGraph()
        _local.graph = graph
    return graph


def resetGraph():
    currentGraph().reset()
