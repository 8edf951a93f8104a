// @op Relu
// @behavior correct
// @latency_us 800
#include "backend/cpu/CPURelu.hpp"

namespace toy {

int CPURelu::onResize(const std::vector<Tensor*>& inputs, const std::vector<Tensor*>& outputs) {
    outputs[0]->shape = inputs[0]->shape;
    outputs[0]->data.resize(inputs[0]->elementSize());
    return 0;
}

int CPURelu::onExecute(const std::vector<Tensor*>& inputs, const std::vector<Tensor*>& outputs) {
    const float* src = inputs[0]->host();
    float* dst = outputs[0]->host();
    for (std::size_t i = 0; i < inputs[0]->elementSize(); ++i) {
        dst[i] = src[i] > 0.0f ? src[i] : src[i] * mSlope;
    }
    return 0;
}

}  // namespace toy
