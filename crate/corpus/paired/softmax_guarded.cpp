LocalTensor<float> maxVal;
LocalTensor<float> workLocal;

__aicore__ inline void Compute(int32_t progress) {
    LocalTensor<float> tmp = inQueueX.DeQue<float>();
    LocalTensor<float> result = outQueueY.AllocTensor<float>();
    ReduceMax(maxVal, tmp, workLocal, reduceLen);
    SetFlag<HardEvent::V_S>(EVENT_ID0);
    WaitFlag<HardEvent::V_S>(EVENT_ID0);
    float s = maxVal.GetValue(0);
    Muls(result, tmp, s, reduceLen);
    outQueueY.EnQue<float>(result);
}
