__aicore__ inline void Compute() {
    LocalTensor<float> a = inQueueA.DeQue<float>();
    LocalTensor<float> b = inQueueB.DeQue<float>();
    LocalTensor<float> c = outQueueC.AllocTensor<float>();
    Mmad(acc, a, b, params);
    PipeBarrier<PIPE_M>();
    Relu(c, acc, 64);
    outQueueC.EnQue(c);
}
