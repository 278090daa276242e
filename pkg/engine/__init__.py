# NucleiGrind Engine Package
