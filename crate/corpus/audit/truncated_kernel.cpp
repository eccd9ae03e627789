__aicore__ inline void Compute(int32_t i) {
    LocalTensor<float> x = inQueueX.DeQue<float>();
    Exp(y, x, 64
